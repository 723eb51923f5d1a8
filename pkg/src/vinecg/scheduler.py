"""Sampling orders, source vertices and h-call scheduling.

The traversal planner here is the single definition of visit semantics: the
sampler executes the plan it produces, and :func:`query` simply counts the
downward (h-function) steps in it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

from .errors import InfeasibleOrderError
from .vcg import CopulaVertex, VariableVertex, VineModel

__all__ = [
    "SamplingOrder",
    "Step",
    "plan_sampling",
    "plan_forward",
    "get_source",
    "query",
    "schedule",
]


@dataclass(frozen=True)
class SamplingOrder:
    """An ordered tuple of variables, sampled right to left.

    Variables outside ``order`` become top-level sources; those listed in
    ``cond_set`` are supplied by the caller instead of being sampled.
    """

    order: tuple[int, ...]
    d: int
    cond_set: tuple[int, ...] = ()

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        cond = tuple(sorted(int(i) for i in self.cond_set))
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "cond_set", cond)
        if not 1 <= len(order) <= self.d:
            raise InfeasibleOrderError(f"order length must be in 1..{self.d}, got {len(order)}")
        if len(set(order)) != len(order):
            raise InfeasibleOrderError(f"order {order} repeats a variable")
        for i in order + cond:
            if not 0 <= i < self.d:
                raise InfeasibleOrderError(f"variable {i} outside 0..{self.d - 1}")
        if set(order) & set(cond):
            raise InfeasibleOrderError(f"order {order} overlaps conditioning set {cond}")

    def sources(self) -> tuple[VariableVertex, ...]:
        """Implied source vertices, deepest first."""
        rest = set(range(self.d)) - set(self.order)
        out = [
            VariableVertex(v, tuple(set(self.order[i + 1 :]) | rest)) for i, v in enumerate(self.order)
        ]
        out.extend(VariableVertex(j) for j in sorted(rest))
        return tuple(out)

    def __str__(self) -> str:
        return "(" + ",".join(str(i) for i in self.order) + ")"


def _as_order(order, m: VineModel, cond_set: Iterable[int] = ()) -> SamplingOrder:
    if isinstance(order, SamplingOrder):
        if order.d != m.d:
            raise InfeasibleOrderError(f"order is for d={order.d}, model has d={m.d}")
        return order
    return SamplingOrder(tuple(order), m.d, tuple(cond_set))


@dataclass(frozen=True)
class Step:
    """One traversal action.

    ``kind`` is ``"seed"`` (fresh uniforms), ``"given"`` (caller-supplied
    column), ``"hinv"`` (upward visit) or ``"h"`` (downward visit).  For
    ``"h"`` the inputs are the copula's (left, right) parents; for ``"hinv"``
    they are the vertex being ascended from and the opposite parent.
    """

    kind: str
    target: VariableVertex
    copula: CopulaVertex | None = None
    inputs: tuple[VariableVertex, ...] = ()


class _Planner:
    def __init__(self, m: VineModel, given: Collection[VariableVertex]):
        self.m = m
        self.given = set(given)
        self.visited: set[VariableVertex] = set()
        self.steps: list[Step] = []

    def _producer(self, v: VariableVertex) -> CopulaVertex:
        try:
            return self.m.producer(v)
        except KeyError:
            raise InfeasibleOrderError(f"vertex {{{v.key}}} is not in the graph") from None

    def _need(self, v: VariableVertex) -> None:
        if v in self.visited:
            return
        if v.level == 0:
            raise InfeasibleOrderError(f"top-level vertex {{{v.key}}} requested before it is available")
        self.down(v)

    def down(self, v: VariableVertex) -> None:
        cv = self._producer(v)
        for p in cv.parents:
            self._need(p)
        self.steps.append(Step("h", v, cv, cv.parents))
        self.visited.add(v)

    def up(self, v: VariableVertex) -> VariableVertex:
        cv = self._producer(v)
        other = VariableVertex(cv.partner(v.conditioned), cv.conditioning)
        self._need(other)
        target = VariableVertex(v.conditioned, cv.conditioning)
        if target in self.visited:
            raise InfeasibleOrderError(f"vertex {{{target.key}}} reached twice while ascending")
        self.steps.append(Step("hinv", target, cv, (v, other)))
        self.visited.add(target)
        return target

    def seed(self, src: VariableVertex) -> None:
        if src in self.visited:
            raise InfeasibleOrderError(f"source {{{src.key}}} is already determined")
        self.steps.append(Step("given" if src in self.given else "seed", src))
        self.visited.add(src)


def _by_depth(vs: Iterable[VariableVertex]) -> list[VariableVertex]:
    # shallowest first, ties by variable index
    return sorted(vs, key=lambda v: (v.level, v.conditioned))


def plan_sampling(
    m: VineModel, sources: Sequence[VariableVertex], given: Collection[VariableVertex] = ()
) -> list[Step]:
    """Inverse-Rosenblatt traversal from ``sources`` up to the top level."""
    pl = _Planner(m, given)
    for src in _by_depth(sources):
        if not m.has_vertex(src):
            raise InfeasibleOrderError(f"source vertex {{{src.key}}} is not in the graph")
        pl.seed(src)
        v = src
        while v.level > 0:
            v = pl.up(v)
    return pl.steps


def plan_forward(m: VineModel, sources: Sequence[VariableVertex]) -> list[Step]:
    """Rosenblatt traversal: all top-level vertices given, sources computed downward."""
    top = [VariableVertex(j) for j in range(m.d)]
    pl = _Planner(m, top)
    for v in top:
        pl.seed(v)
    for src in _by_depth(sources):
        if not m.has_vertex(src):
            raise InfeasibleOrderError(f"source vertex {{{src.key}}} is not in the graph")
        pl._need(src)
    return pl.steps


def get_source(order, m: VineModel) -> tuple[VariableVertex, ...]:
    """Source vertices implied by ``order``; every one must exist in ``m``.

    Raises:
        InfeasibleOrderError: naming the first implied vertex absent from ``m``.
    """
    so = _as_order(order, m)
    srcs = so.sources()
    for v in srcs:
        if not m.has_vertex(v):
            raise InfeasibleOrderError(f"order {so} implies vertex {{{v.key}}} which is not in the graph")
    return srcs


def query(order, m: VineModel) -> int:
    """Number of h-function (downward) visits sampling with ``order`` performs."""
    so = _as_order(order, m)
    srcs = get_source(so, m)
    given = [VariableVertex(j) for j in so.cond_set]
    return sum(1 for st in plan_sampling(m, srcs, given) if st.kind == "h")


def schedule(m: VineModel, cond_set: Iterable[int] = (), worst: bool = False) -> SamplingOrder:
    """Greedy bottom-up sampling order minimizing h-function calls.

    At each level the copula vertex spanning all not-yet-ordered variables
    is located; if exactly one of its conditioned variables is free (not in
    ``cond_set``) it is taken, otherwise the candidate whose extended order
    queries fewer h-calls wins (the left one on ties). ``worst=True`` flips
    the comparison.

    Raises:
        InfeasibleOrderError: if the structure admits no conditional order.
    """
    d = m.d
    cond = set(int(i) for i in cond_set)
    if any(not 0 <= i < d for i in cond):
        raise InfeasibleOrderError(f"conditioning set {sorted(cond)} outside 0..{d - 1}")
    free = set(range(d)) - cond
    if not free:
        raise InfeasibleOrderError("conditioning set covers every variable")
    order: list[int] = []
    while d - len(order) > 1 and len(order) < len(free):
        remaining = set(range(d)) - set(order)
        k = d - 2 - len(order)
        cv = m.copula_by_union(k, remaining)
        if cv is None:
            raise InfeasibleOrderError(f"no copula vertex at level {k} spans {sorted(remaining)}")
        outside = [x for x in (cv.left, cv.right) if x in free]
        if not outside:
            raise InfeasibleOrderError(
                f"copula {cv.key} conditions only on fixed variables; "
                f"no conditional order exists for {sorted(cond)}"
            )
        if len(outside) == 1:
            pick = outside[0]
        else:
            q_left = query(SamplingOrder(tuple(order) + (cv.left,), d), m)
            q_right = query(SamplingOrder(tuple(order) + (cv.right,), d), m)
            take_left = q_left >= q_right if worst else q_left <= q_right
            pick = cv.left if take_left else cv.right
        order.append(pick)
    if len(order) < len(free):
        order.extend(sorted(free - set(order)))
    so = SamplingOrder(tuple(order), d, tuple(sorted(cond)))
    get_source(so, m)
    return so
