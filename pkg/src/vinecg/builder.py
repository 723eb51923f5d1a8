"""Structure selection and level-by-level fitting.

The R-vine builder is a two-stage Kruskal: at every level the candidates whose
conditioned pair lies inside the conditioning set are placed first, up to a
quota, so that the conditioning variables end up in a sub-vine of their own and
conditional sampling stays feasible.  C-vine and D-vine builders impose the
same constraint through the choice of star centres and of the level-0 path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .bicop import ALL_FAMILIES, EPS, INDEPENDENCE, BivariateCopula, CopulaFamily, fit
from .deptools import kendall_tau
from .errors import DataError, DomainError, StructureError
from .scheduler import schedule
from .vcg import CopulaVertex, VariableVertex, VineModel, validate

__all__ = [
    "BuildConfig",
    "DisjointSet",
    "candidate_edges",
    "kruskal_two_stage",
    "build",
    "build_rvine",
    "build_cvine",
    "build_dvine",
    "dvine_path",
    "fit_structure",
    "random_structure",
    "edge_taus",
]

STRUCTURE_KINDS = ("rvine", "cvine", "dvine")


@dataclass(frozen=True)
class BuildConfig:
    """Options for :func:`build`."""

    cond_set: tuple[int, ...] = ()
    structure_kind: str = "rvine"
    family_set: frozenset = field(default=ALL_FAMILIES)
    fit_method: str = "itau"
    independence_threshold: float = 0.01
    tsp_epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "cond_set", tuple(sorted({int(i) for i in self.cond_set})))
        object.__setattr__(self, "family_set", frozenset(CopulaFamily(f) for f in self.family_set))
        if self.structure_kind not in STRUCTURE_KINDS:
            raise DomainError(f"structure_kind must be one of {STRUCTURE_KINDS}, got {self.structure_kind!r}")
        if self.fit_method not in ("itau", "mle"):
            raise DomainError(f"fit_method must be 'itau' or 'mle', got {self.fit_method!r}")
        if not self.independence_threshold >= 0:
            raise DomainError(f"independence_threshold must be >= 0, got {self.independence_threshold!r}")
        if not self.tsp_epsilon > 0:
            raise DomainError(f"tsp_epsilon must be > 0, got {self.tsp_epsilon!r}")
        if not self.family_set:
            raise DomainError("family_set must not be empty")

    def check(self, d: int) -> None:
        """Raise if the conditioning set does not fit dimension ``d``."""
        bad = [i for i in self.cond_set if not 0 <= i < d]
        if bad:
            raise DomainError(f"cond_set indices {bad} outside 0..{d - 1}")
        if len(self.cond_set) >= d:
            raise DomainError(f"|cond_set| = {len(self.cond_set)} must be < d = {d}")


class DisjointSet:
    """Union-find with path compression and union by rank."""

    def __init__(self, keys: Iterable[Hashable] = ()):
        self.parent: dict = {}
        self.rank: dict = {}
        for k in keys:
            self.add(k)

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.rank[x] = 0

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y) -> bool:
        """Merge the sets of ``x`` and ``y``; False if they were already joined."""
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        return True


def _candidate_pairs(level_vertices: Iterable[VariableVertex]) -> list[CopulaVertex]:
    by_cond: dict[tuple[int, ...], list[int]] = {}
    for v in level_vertices:
        by_cond.setdefault(v.conditioning, []).append(v.conditioned)
    out = []
    for cond, members in by_cond.items():
        for a, b in combinations(sorted(set(members)), 2):
            out.append(CopulaVertex(a, b, cond))
    return out


def candidate_edges(
    level_vertices: Iterable[VariableVertex],
    obs: Mapping[VariableVertex, np.ndarray] | Callable[[CopulaVertex], float],
) -> list[tuple[CopulaVertex, float]]:
    """Candidate copula vertices of one level with their weights.

    Pairs qualify when they share a conditioning set.  With a mapping of
    pseudo-observation columns the weight is ``|kendall_tau|``; a callable is
    used as the weight directly.  The list comes back sorted by weight
    descending, then by key.
    """
    out = []
    for cv in _candidate_pairs(level_vertices):
        if callable(obs):
            w = float(obs(cv))
        else:
            a, b = cv.parents
            w = abs(kendall_tau(obs[a], obs[b]))
        out.append((cv, w))
    out.sort(key=lambda t: (-t[1], t[0].key))
    return out


def kruskal_two_stage(
    candidates: Sequence[tuple[CopulaVertex, float]] | Sequence[CopulaVertex],
    cond_set: Iterable[int],
    k: int,
    d: int,
) -> list[CopulaVertex]:
    """Select ``d - k - 1`` level-``k`` edges forming a spanning tree.

    ``candidates`` must already be sorted.  Stage one only looks at edges whose
    conditioned pair lies in ``cond_set`` and stops at ``|cond_set| - k - 1``
    edges; stage two scans everything not yet taken.

    Raises:
        StructureError: when the candidates cannot span the level.
    """
    cands = [c[0] if isinstance(c, tuple) else c for c in candidates]
    cond = set(cond_set)
    ds = DisjointSet()
    for cv in cands:
        # both children of a level k-1 copula share one node: key by the union
        for p in cv.parents:
            ds.add(p.mask)
    chosen: list[CopulaVertex] = []
    taken: set[CopulaVertex] = set()

    def take(cv: CopulaVertex) -> None:
        a, b = cv.parents
        if ds.union(a.mask, b.mask):
            chosen.append(cv)
            taken.add(cv)

    quota = len(cond) - k - 1
    if quota > 0:
        for cv in cands:
            if len(chosen) >= quota:
                break
            if cv.left in cond and cv.right in cond:
                take(cv)
    target = d - k - 1
    for cv in cands:
        if len(chosen) >= target:
            break
        if cv not in taken:
            take(cv)
    if len(chosen) < target:
        raise StructureError(
            f"level {k}: only {len(chosen)} of {target} edges can be placed from {len(cands)} candidates"
        )
    return chosen


# -- data handling ------------------------------------------------------------


def _check_obs(obs) -> np.ndarray:
    u = np.asarray(obs, dtype=float)
    if u.ndim != 2:
        raise DataError(f"expected an n x d matrix, got {u.ndim} dimensions")
    n, d = u.shape
    if d < 2:
        raise DataError(f"need at least 2 columns, got {d}")
    if n < 10:
        raise DataError(f"need at least 10 rows, got {n}")
    bad = ~((u > 0.0) & (u < 1.0))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataError(f"pseudo-observation {u[row, col]!r} at row {row}, column {col} is outside (0, 1)")
    for j in range(d):
        if np.all(u[:, j] == u[0, j]):
            raise DataError(f"column {j} is constant")
    return u


class _LevelFitter:
    """Pseudo-observations of the current level and the fitted edges so far."""

    def __init__(self, u: np.ndarray, cfg: BuildConfig):
        self.cfg = cfg
        self.obs = {VariableVertex(j): u[:, j] for j in range(u.shape[1])}
        self.taus: dict[CopulaVertex, float] = {}

    def weight(self, cv: CopulaVertex) -> float:
        if cv not in self.taus:
            a, b = cv.parents
            try:
                self.taus[cv] = kendall_tau(self.obs[a], self.obs[b])
            except DataError:
                # a constant conditional column: no measurable dependence
                self.taus[cv] = 0.0
        return abs(self.taus[cv])

    def vertices(self) -> list[VariableVertex]:
        return sorted(self.obs, key=lambda v: (v.conditioning, v.conditioned))

    def fit_level(self, edges: Sequence[CopulaVertex], last: bool) -> list[CopulaVertex]:
        out, nxt = [], {}
        for cv in edges:
            a, b = cv.parents
            ua, ub = self.obs[a], self.obs[b]
            self.weight(cv)
            cop = fit(
                np.column_stack([ua, ub]),
                self.cfg.family_set,
                self.cfg.fit_method,
                self.cfg.independence_threshold,
                tau=self.taus[cv],
            )
            out.append(cv.with_copula(cop))
            if not last:
                left, right = cv.children
                nxt[left] = np.clip(cop.hfunc1(ua, ub), EPS, 1.0 - EPS)
                nxt[right] = np.clip(cop.hfunc2(ua, ub), EPS, 1.0 - EPS)
        self.obs = nxt
        self.taus = {}
        return out


def _finish(d: int, copulas: list[CopulaVertex], cfg: BuildConfig) -> VineModel:
    m = VineModel(d, copulas, cond_set=cfg.cond_set)
    issues = validate(m)
    if issues:
        raise StructureError(f"{cfg.structure_kind} builder produced an invalid vine", issues)
    return m.replace(default_order=schedule(m, cfg.cond_set).order)


def build_rvine(obs, cfg: BuildConfig = BuildConfig()) -> VineModel:
    """Two-stage Kruskal R-vine admitting ``cfg.cond_set`` for conditional sampling."""
    u = _check_obs(obs)
    d = u.shape[1]
    cfg.check(d)
    lf = _LevelFitter(u, cfg)
    copulas: list[CopulaVertex] = []
    for k in range(d - 1):
        cands = candidate_edges(lf.vertices(), lf.weight)
        edges = kruskal_two_stage(cands, cfg.cond_set, k, d)
        copulas += lf.fit_level(edges, last=k == d - 2)
    return _finish(d, copulas, cfg)


def _cvine_centre(rest: Sequence[int], allowed: Sequence[int], w: Callable[[int, int], float]) -> int:
    best, best_s = None, -math.inf
    for c in allowed:
        s = sum(w(c, j) for j in rest if j != c)
        if s > best_s:
            best, best_s = c, s
    return best


def build_cvine(obs, cfg: BuildConfig = BuildConfig()) -> VineModel:
    """C-vine: a star at every level; conditioning variables are the first centres."""
    u = _check_obs(obs)
    d = u.shape[1]
    cfg.check(d)
    lf = _LevelFitter(u, cfg)
    cond = set(cfg.cond_set)
    centres: list[int] = []
    copulas: list[CopulaVertex] = []
    for k in range(d - 1):
        rest = [j for j in range(d) if j not in centres]
        pool = [j for j in rest if (j in cond) == (k < len(cond))]
        S = tuple(centres)

        def w(a, b, S=S):
            return lf.weight(CopulaVertex(min(a, b), max(a, b), S))

        c = _cvine_centre(rest, pool, w)
        centres.append(c)
        edges = [CopulaVertex(min(c, j), max(c, j), S) for j in rest if j != c]
        copulas += lf.fit_level(edges, last=k == d - 2)
    return _finish(d, copulas, cfg)


def _path_cost(path: Sequence[int], cost: np.ndarray) -> float:
    return float(sum(cost[path[i], path[i + 1]] for i in range(len(path) - 1)))


def _contiguous(path: Sequence[int], cluster: set) -> bool:
    if not cluster:
        return True
    pos = [i for i, v in enumerate(path) if v in cluster]
    return pos[-1] - pos[0] + 1 == len(pos)


def _nearest_neighbour(start: int, nodes: Sequence[int], cost: np.ndarray, cluster: set) -> list[int]:
    # grow the cluster's path first, then attach the free nodes at either end
    path = [start]
    phases = [sorted(cluster), [v for v in nodes if v not in cluster]] if cluster else [list(nodes)]
    for phase in phases:
        todo = [v for v in phase if v not in path]
        while todo:
            best = None
            for v in todo:
                for at_end in (True, False):
                    end = path[-1] if at_end else path[0]
                    c = cost[end, v]
                    if best is None or c < best[0]:
                        best = (c, v, at_end)
            _, v, at_end = best
            if at_end:
                path.append(v)
            else:
                path.insert(0, v)
            todo.remove(v)
    return path


def _two_opt(path: list[int], cost: np.ndarray, cluster: set) -> list[int]:
    improved = True
    best_c = _path_cost(path, cost)
    while improved:
        improved = False
        for i in range(len(path) - 1):
            for j in range(i + 1, len(path)):
                cand = path[:i] + path[i : j + 1][::-1] + path[j + 1 :]
                c = _path_cost(cand, cost)
                if c < best_c - 1e-12 and _contiguous(cand, cluster):
                    path, best_c, improved = cand, c, True
    return path


def dvine_path(weights: np.ndarray, cond_set: Iterable[int] = (), eps: float = 1e-6) -> list[int]:
    """Heuristic Hamiltonian path for a D-vine's first level.

    The travel cost of an edge with weight ``w`` is ``log(1 + 1/(w + eps))``.
    Nearest-neighbour paths from every start are improved by 2-opt moves that
    keep the ``cond_set`` variables contiguous; the cheapest path wins.
    """
    w = np.abs(np.asarray(weights, dtype=float))
    d = w.shape[0]
    if d == 1:
        return [0]
    cost = np.log1p(1.0 / (w + eps))
    cluster = set(int(i) for i in cond_set)
    starts = sorted(cluster) if cluster else list(range(d))
    best, best_c = None, math.inf
    for s in starts:
        p = _two_opt(_nearest_neighbour(s, list(range(d)), cost, cluster), cost, cluster)
        c = _path_cost(p, cost)
        if c < best_c - 1e-12:
            best, best_c = p, c
    # canonical direction
    return best if best[0] < best[-1] else best[::-1]


def _dvine_edges(path: Sequence[int], k: int) -> list[CopulaVertex]:
    out = []
    for i in range(len(path) - k - 1):
        a, b = path[i], path[i + k + 1]
        out.append(CopulaVertex(min(a, b), max(a, b), tuple(path[i + 1 : i + k + 1])))
    return out


def build_dvine(obs, cfg: BuildConfig = BuildConfig()) -> VineModel:
    """D-vine along a heuristic TSP path with the conditioning variables kept contiguous."""
    u = _check_obs(obs)
    d = u.shape[1]
    cfg.check(d)
    lf = _LevelFitter(u, cfg)
    w = np.zeros((d, d))
    for a, b in combinations(range(d), 2):
        w[a, b] = w[b, a] = lf.weight(CopulaVertex(a, b))
    path = dvine_path(w, cfg.cond_set, cfg.tsp_epsilon)
    copulas: list[CopulaVertex] = []
    for k in range(d - 1):
        copulas += lf.fit_level(_dvine_edges(path, k), last=k == d - 2)
    return _finish(d, copulas, cfg)


_BUILDERS = {"rvine": build_rvine, "cvine": build_cvine, "dvine": build_dvine}


def build(obs, cfg: BuildConfig = BuildConfig()) -> VineModel:
    """Select and fit a vine of kind ``cfg.structure_kind`` on pseudo-observations."""
    return _BUILDERS[cfg.structure_kind](obs, cfg)


def fit_structure(obs, structure: VineModel, cfg: BuildConfig = BuildConfig()) -> VineModel:
    """Refit every pair-copula of ``structure`` on ``obs``, keeping the graph."""
    u = _check_obs(obs)
    d = u.shape[1]
    if d != structure.d:
        raise DataError(f"data has {d} columns, structure has d = {structure.d}")
    lf = _LevelFitter(u, cfg)
    copulas: list[CopulaVertex] = []
    for k, level in enumerate(structure.levels):
        copulas += lf.fit_level([cv.with_copula(None) for cv in level], last=k == len(structure.levels) - 1)
    return VineModel(d, copulas, structure.default_order, structure.cond_set)


def random_structure(
    d: int,
    rng: np.random.Generator,
    cond_set: Iterable[int] = (),
    kind: str = "rvine",
    copula: BivariateCopula | None = INDEPENDENCE,
) -> VineModel:
    """A random vine structure of the given kind (no data involved).

    R-vines run the two-stage Kruskal on uniform random weights, C-vines pick
    random admissible centres, D-vines use a random path with the
    conditioning variables contiguous.  Every copula vertex carries ``copula``.
    """
    cond = tuple(sorted(set(int(i) for i in cond_set)))
    copulas: list[CopulaVertex] = []
    if kind == "rvine":
        verts = [VariableVertex(j) for j in range(d)]
        for k in range(d - 1):
            ws = {}
            cands = candidate_edges(verts, lambda cv: ws.setdefault(cv, float(rng.random())))
            edges = kruskal_two_stage(cands, cond, k, d)
            copulas += edges
            verts = [ch for cv in edges for ch in cv.children]
    elif kind == "cvine":
        centres: list[int] = []
        for k in range(d - 1):
            rest = [j for j in range(d) if j not in centres]
            pool = [j for j in rest if (j in cond) == (k < len(cond))]
            c = int(rng.choice(pool))
            copulas += [CopulaVertex(min(c, j), max(c, j), tuple(centres)) for j in rest if j != c]
            centres.append(c)
    elif kind == "dvine":
        inner = [int(i) for i in rng.permutation(cond)] if cond else []
        free = [int(i) for i in rng.permutation([j for j in range(d) if j not in cond])]
        cut = int(rng.integers(0, len(free) + 1))
        path = free[:cut] + inner + free[cut:]
        for k in range(d - 1):
            copulas += _dvine_edges(path, k)
    else:
        raise DomainError(f"unknown structure kind {kind!r}")
    m = VineModel(d, [cv.with_copula(copula) for cv in copulas], cond_set=cond)
    return m


def edge_taus(obs, m: VineModel) -> dict[str, float]:
    """Empirical Kendall's tau of every copula vertex's parent columns, by key."""
    u = _check_obs(obs)
    cfg = BuildConfig()
    lf = _LevelFitter(u, cfg)
    out: dict[str, float] = {}
    for k, level in enumerate(m.levels):
        nxt = {}
        for cv in level:
            lf.weight(cv)
            out[cv.key] = lf.taus[cv]
            if k + 1 < len(m.levels):
                a, b = (lf.obs[p] for p in cv.parents)
                cop = cv.copula if cv.copula is not None else INDEPENDENCE
                left, right = cv.children
                nxt[left] = np.clip(cop.hfunc1(a, b), EPS, 1.0 - EPS)
                nxt[right] = np.clip(cop.hfunc2(a, b), EPS, 1.0 - EPS)
        lf.obs, lf.taus = nxt, {}
    return out
