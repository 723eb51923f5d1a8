"""The vine computational graph (VCG).

Variable vertices ``{l|S}`` hold (conditional) pseudo-observations; copula
vertices ``{l,r;S}`` own a pair-copula.  Every copula vertex has up-edges from
its parents ``{l|S}``, ``{r|S}`` and down-edges to its children
``{l|S+r}``, ``{r|S+l}``.  Level ``k`` holds the copula vertices whose
conditioning set has size ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

from .bicop import INDEPENDENCE, BivariateCopula
from .errors import StructureError

__all__ = [
    "VariableVertex",
    "CopulaVertex",
    "VineModel",
    "validate",
    "fig1a_fixture",
    "export_dot",
]


def _mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def _fmt(indices: Iterable[int]) -> str:
    return ",".join(str(i) for i in indices)


@dataclass(frozen=True, order=True)
class VariableVertex:
    """``{conditioned | conditioning}``; the conditioning tuple is kept sorted."""

    conditioned: int
    conditioning: tuple[int, ...] = ()

    def __post_init__(self):
        cond = tuple(sorted(int(i) for i in self.conditioning))
        if len(set(cond)) != len(cond):
            raise StructureError(f"duplicate indices in conditioning set {cond}")
        if self.conditioned in cond:
            raise StructureError(f"conditioned index {self.conditioned} appears in its conditioning set {cond}")
        object.__setattr__(self, "conditioned", int(self.conditioned))
        object.__setattr__(self, "conditioning", cond)

    @property
    def level(self) -> int:
        return len(self.conditioning)

    @property
    def key(self) -> str:
        return f"{self.conditioned}|{_fmt(self.conditioning)}"

    @property
    def mask(self) -> int:
        """Bitmask of conditioned and conditioning indices."""
        return _mask(self.conditioning) | (1 << self.conditioned)

    def __str__(self) -> str:
        if not self.conditioning:
            return "{" + str(self.conditioned) + "}"
        return "{" + self.key + "}"


@dataclass(frozen=True)
class CopulaVertex:
    """``{left, right ; conditioning}`` with ``left < right``."""

    left: int
    right: int
    conditioning: tuple[int, ...] = ()
    copula: BivariateCopula | None = field(default=None, compare=False)

    def __post_init__(self):
        cond = tuple(sorted(int(i) for i in self.conditioning))
        if not self.left < self.right:
            raise StructureError(f"copula vertex needs left < right, got ({self.left}, {self.right})")
        if len(set(cond)) != len(cond):
            raise StructureError(f"duplicate indices in conditioning set {cond}")
        if self.left in cond or self.right in cond:
            raise StructureError(
                f"conditioned pair ({self.left}, {self.right}) intersects conditioning set {cond}"
            )
        object.__setattr__(self, "left", int(self.left))
        object.__setattr__(self, "right", int(self.right))
        object.__setattr__(self, "conditioning", cond)

    @property
    def level(self) -> int:
        return len(self.conditioning)

    @property
    def key(self) -> str:
        return f"{self.left},{self.right};{_fmt(self.conditioning)}"

    @property
    def mask(self) -> int:
        return _mask(self.conditioning) | (1 << self.left) | (1 << self.right)

    @property
    def parents(self) -> tuple[VariableVertex, VariableVertex]:
        return (
            VariableVertex(self.left, self.conditioning),
            VariableVertex(self.right, self.conditioning),
        )

    @property
    def children(self) -> tuple[VariableVertex, VariableVertex]:
        return (
            VariableVertex(self.left, self.conditioning + (self.right,)),
            VariableVertex(self.right, self.conditioning + (self.left,)),
        )

    def partner(self, index: int) -> int:
        """The other conditioned index."""
        if index == self.left:
            return self.right
        if index == self.right:
            return self.left
        raise KeyError(f"{index} is not conditioned by {self.key}")

    def with_copula(self, copula: BivariateCopula | None) -> "CopulaVertex":
        return CopulaVertex(self.left, self.right, self.conditioning, copula)

    def sort_key(self) -> tuple:
        return (len(self.conditioning), self.left, self.right, self.conditioning)

    def __str__(self) -> str:
        return self.key


class VineModel:
    """A vine copula as a VCG.

    The model is immutable; ``with_copulas`` and ``replace`` return new models.
    No structural validation happens on construction, see :func:`validate`.

    Attributes:
        d: dimension.
        levels: ``levels[k]`` is the sorted tuple of copula vertices at level k.
        default_order: optional default sampling order.
        cond_set: conditioning variables the structure was selected for.
    """

    def __init__(
        self,
        d: int,
        copulas: Iterable[CopulaVertex],
        default_order: Iterable[int] | None = None,
        cond_set: Iterable[int] = (),
    ):
        self.d = int(d)
        flat = sorted(copulas, key=CopulaVertex.sort_key)
        depth = max([self.d - 1] + [cv.level + 1 for cv in flat])
        levels: list[list[CopulaVertex]] = [[] for _ in range(max(depth, 0))]
        for cv in flat:
            levels[cv.level].append(cv)
        self.levels: tuple[tuple[CopulaVertex, ...], ...] = tuple(tuple(lv) for lv in levels)
        self.default_order = None if default_order is None else tuple(int(i) for i in default_order)
        self.cond_set = tuple(sorted(int(i) for i in cond_set))
        self._by_child: dict[VariableVertex, CopulaVertex] = {}
        self._by_union: dict[tuple[int, int], CopulaVertex] = {}
        for cv in flat:
            for child in cv.children:
                self._by_child.setdefault(child, cv)
            self._by_union.setdefault((cv.level, cv.mask), cv)

    # -- lookups -----------------------------------------------------------

    @property
    def copulas(self) -> tuple[CopulaVertex, ...]:
        return tuple(cv for lv in self.levels for cv in lv)

    def __iter__(self) -> Iterator[CopulaVertex]:
        return iter(self.copulas)

    def has_vertex(self, v: VariableVertex) -> bool:
        if not v.conditioning:
            return 0 <= v.conditioned < self.d
        return v in self._by_child

    def producer(self, v: VariableVertex) -> CopulaVertex:
        """The copula vertex whose down-edge ends at ``v``."""
        try:
            return self._by_child[v]
        except KeyError:
            raise KeyError(f"variable vertex {v.key} is not in the graph") from None

    def copula_by_union(self, level: int, indices: Iterable[int]) -> CopulaVertex | None:
        return self._by_union.get((level, _mask(indices)))

    def variable_vertices(self, level: int) -> list[VariableVertex]:
        """Variable vertices whose conditioning set has size ``level``."""
        if level == 0:
            return [VariableVertex(j) for j in range(self.d)]
        if level - 1 >= len(self.levels):
            return []
        return sorted(ch for cv in self.levels[level - 1] for ch in cv.children)

    def all_variable_vertices(self) -> list[VariableVertex]:
        out = []
        for k in range(len(self.levels) + 1):
            out.extend(self.variable_vertices(k))
        return out

    # -- derived models ----------------------------------------------------

    def with_copulas(
        self, copulas: BivariateCopula | Mapping[str, BivariateCopula] | Callable[[CopulaVertex], BivariateCopula]
    ) -> "VineModel":
        """Attach pair-copulas: one shared value, a key mapping, or a callable."""
        if isinstance(copulas, BivariateCopula):
            fn = lambda cv: copulas  # noqa: E731
        elif callable(copulas):
            fn = copulas
        else:
            fn = lambda cv: copulas[cv.key]  # noqa: E731
        return VineModel(
            self.d,
            (cv.with_copula(fn(cv)) for cv in self.copulas),
            self.default_order,
            self.cond_set,
        )

    def replace(self, **changes) -> "VineModel":
        kw = {"default_order": self.default_order, "cond_set": self.cond_set}
        kw.update(changes)
        return VineModel(self.d, self.copulas, **kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VineModel):
            return NotImplemented
        mine = [(cv.key, cv.copula) for cv in self.copulas]
        theirs = [(cv.key, cv.copula) for cv in other.copulas]
        return (
            self.d == other.d
            and mine == theirs
            and self.default_order == other.default_order
            and self.cond_set == other.cond_set
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"VineModel(d={self.d}, copulas={len(self.copulas)}, cond_set={self.cond_set})"


def _spanning_tree_issue(nodes: set, edges: list[tuple]) -> str | None:
    parent = {x: x for x in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cycle = False
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            cycle = True
        else:
            parent[ra] = rb
    roots = {find(x) for x in nodes}
    if cycle:
        return "contains a cycle"
    if len(roots) > 1:
        return f"is disconnected ({len(roots)} components)"
    return None


def validate(m: VineModel) -> list[str]:
    """Every violated VCG condition of ``m``; an empty list means valid."""
    out: list[str] = []
    d = m.d
    if d < 2:
        return [f"dimension: d = {d} < 2"]
    for cv in m.copulas:
        bad = [i for i in (cv.left, cv.right, *cv.conditioning) if not 0 <= i < d]
        if bad:
            out.append(f"index: copula {cv.key} references indices {bad} outside 0..{d - 1}")
    if out:
        return out
    for k, level in enumerate(m.levels):
        if k > d - 2:
            if level:
                out.append(f"cardinality: level {k} has {len(level)} copula vertices, expected none (d = {d})")
            continue
        if len(level) != d - k - 1:
            out.append(f"cardinality: |E_{k}| = {len(level)} != {d - k - 1}")
        unions: dict[int, CopulaVertex] = {}
        for cv in level:
            if cv.mask in unions:
                out.append(f"duplicate: copula {cv.key} repeats the variable set of {unions[cv.mask].key}")
            unions.setdefault(cv.mask, cv)
        present = set(m.variable_vertices(k))
        n_nodes = d if k == 0 else len({cv.mask for cv in m.levels[k - 1]})
        if n_nodes != d - k:
            out.append(f"cardinality: level {k} has {n_nodes} vine nodes, expected {d - k}")
        parents_ok = True
        for cv in level:
            for p in cv.parents:
                if p not in present:
                    parents_ok = False
                    out.append(
                        f"proximity: parent {p.key} of copula {cv.key} is not a variable vertex at level {k}"
                    )
        if not parents_ok:
            continue
        # skeleton of (E_{k-1} + V_k + E_k, down-edges of k-1 + up-edges of k)
        nodes: set = {("v", v) for v in present} | {("e", cv.key) for cv in level}
        edges: list[tuple] = []
        if k > 0:
            nodes |= {("e", cv.key) for cv in m.levels[k - 1]}
            for cv in m.levels[k - 1]:
                for ch in cv.children:
                    edges.append((("e", cv.key), ("v", ch)))
        for cv in level:
            for p in cv.parents:
                edges.append((("v", p), ("e", cv.key)))
        issue = _spanning_tree_issue(nodes, edges)
        if issue:
            out.append(f"spanning-tree: level {k} skeleton {issue}")
    return out


def fig1a_fixture(copula: BivariateCopula = INDEPENDENCE) -> VineModel:
    """The d = 5 R-vine used throughout as the canonical worked example."""
    spec = [
        (0, 2, ()),
        (1, 2, ()),
        (2, 4, ()),
        (3, 4, ()),
        (0, 4, (2,)),
        (1, 4, (2,)),
        (2, 3, (4,)),
        (0, 3, (2, 4)),
        (1, 3, (2, 4)),
        (0, 1, (2, 3, 4)),
    ]
    return VineModel(5, [CopulaVertex(l, r, s, copula) for l, r, s in spec])


def _dot_id(prefix: str, key: str) -> str:
    return f'"{prefix}:{key}"'


def export_dot(m: VineModel) -> str:
    """Graphviz DOT rendering: ellipses for variables, boxes for copulas."""
    if m.d < 2:
        raise StructureError(f"cannot export a vine of dimension {m.d}")
    problems = validate(m)
    if problems:
        raise StructureError("cannot export an invalid model", problems)
    lines = ["digraph vcg {", "  rankdir=TB;"]
    for k in range(len(m.levels) + 1):
        lines.append(f"  subgraph level_{k} {{")
        lines.append("    rank=same;")
        for v in m.variable_vertices(k):
            lines.append(f'    {_dot_id("v", v.key)} [shape=ellipse, label="{v.key}"];')
        lines.append("  }")
        if k < len(m.levels):
            lines.append(f"  subgraph copulas_{k} {{")
            lines.append("    rank=same;")
            for cv in m.levels[k]:
                label = cv.key if cv.copula is None else f"{cv.key}\\n{cv.copula}"
                lines.append(f'    {_dot_id("e", cv.key)} [shape=box, label="{label}"];')
            lines.append("  }")
    for cv in m.copulas:
        for p in cv.parents:
            lines.append(f'  {_dot_id("v", p.key)} -> {_dot_id("e", cv.key)} [class=up];')
        for ch in cv.children:
            lines.append(f'  {_dot_id("e", cv.key)} -> {_dot_id("v", ch.key)} [class=down];')
    lines.append("}")
    return "\n".join(lines) + "\n"
