"""Inverse-Rosenblatt sampling, the forward Rosenblatt transform and densities.

Sampling executes a traversal plan from :mod:`vinecg.scheduler` over whole
columns of ``n`` rows.  Memo entries are reference counted from the plan and
released as soon as their last consumer has run; finished outputs move to
the result batch.

Steps are evaluated demand-driven: starting from the top-level outputs, each
step runs right before its first consumer needs it.  This is a topological
reordering of the same steps, so the h/hinv calls and their results are
unchanged, while entries no longer wait in the memo for a consumer far down
the plan.  The root order is picked by a structure-only dry run.

Source uniforms come from a Philox generator keyed by ``(seed, variable,
conditioning set)``; row ``i`` is the ``i``-th draw of that stream, so values
do not depend on traversal order and a smaller ``n`` yields a prefix.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bicop import EPS, BivariateCopula
from .errors import DataError, InfeasibleOrderError, StructureError
from .scheduler import SamplingOrder, Step, get_source, plan_forward, plan_sampling, schedule
from .vcg import CopulaVertex, VariableVertex, VineModel

__all__ = [
    "Workspace",
    "evaluation_order",
    "source_uniforms",
    "sample",
    "sample_conditional",
    "conditional_quantile",
    "rosenblatt",
    "log_density",
]


class Workspace:
    """Memo of vertex columns with plan-derived reference counts.

    Requested outputs go to ``results`` as soon as they are produced; the memo
    only holds columns that some later step still consumes.

    Attributes:
        memo: vertex -> column of pseudo-observations.
        refcount: vertex -> consumers still to run.
        results: requested output columns.
        hcall_counter: downward (h-function) evaluations executed.
        hinv_counter: upward (inverse h-function) evaluations executed.
        peak: largest number of simultaneously live memo entries.
        hinv_copulas: copula vertices used for upward visits, in order.
    """

    def __init__(self, steps: Sequence[Step], keep: Iterable[VariableVertex]):
        self.memo: dict[VariableVertex, np.ndarray] = {}
        self.refcount: Counter = Counter()
        for st in steps:
            for v in st.inputs:
                self.refcount[v] += 1
        self.keep = set(keep)
        self.results: dict[VariableVertex, np.ndarray] = {}
        self.hcall_counter = 0
        self.hinv_counter = 0
        self.peak = 0
        self.hinv_copulas: list[CopulaVertex] = []

    def put(self, v: VariableVertex, col: np.ndarray) -> None:
        if v in self.keep:
            self.results[v] = col
        if self.refcount[v] > 0:
            self.memo[v] = col
            self.peak = max(self.peak, len(self.memo))

    def release(self, v: VariableVertex) -> None:
        self.refcount[v] -= 1
        if self.refcount[v] <= 0:
            self.memo.pop(v, None)


def _copula(cv: CopulaVertex) -> BivariateCopula:
    if cv.copula is None:
        raise StructureError(f"copula vertex {cv.key} has no fitted pair-copula")
    return cv.copula


def _clip(x: np.ndarray) -> np.ndarray:
    return np.clip(x, EPS, 1.0 - EPS)


def source_uniforms(seed: int, v: VariableVertex, n: int) -> np.ndarray:
    """The seeded uniform column for source vertex ``v``, strictly inside (0, 1)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(v.conditioned, v.level, *v.conditioning))
    bits = np.random.Generator(np.random.Philox(ss)).integers(0, 1 << 53, size=n, dtype=np.int64)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def _dfs_order(steps: Sequence[Step], prod: dict, roots: Sequence[VariableVertex]) -> list[Step]:
    done: set[VariableVertex] = set()
    out: list[Step] = []
    for root in roots:
        stack = [(root, False)]
        while stack:
            v, expanded = stack.pop()
            if v in done:
                continue
            if expanded:
                done.add(v)
                out.append(prod[v])
                continue
            stack.append((v, True))
            for u in reversed(prod[v].inputs):
                if u not in done:
                    stack.append((u, False))
    # anything not feeding an output keeps its plan position at the end
    out.extend(st for st in steps if st.target not in done)
    return out


def _dry_peak(order: Sequence[Step]) -> int:
    rc: Counter = Counter()
    for st in order:
        for v in st.inputs:
            rc[v] += 1
    live: set[VariableVertex] = set()
    peak = 0
    for st in order:
        for v in st.inputs:
            rc[v] -= 1
            if rc[v] == 0:
                live.discard(v)
        if rc[st.target] > 0:
            live.add(st.target)
            peak = max(peak, len(live))
    return peak


_ROOT_TRIALS = 8


@lru_cache(maxsize=256)
def _best_permutation(steps: tuple[Step, ...]) -> tuple[int, ...]:
    # Step equality ignores fitted copulas, so cache positions rather than the
    # steps themselves; the caller applies them to its own plan.
    prod = {st.target: st for st in steps}
    roots = [st.target for st in steps if st.target.level == 0]
    cands = [roots[::-1]]
    rng = np.random.default_rng(0)
    cands += [[roots[i] for i in rng.permutation(len(roots))] for _ in range(_ROOT_TRIALS)]
    best = min((_dfs_order(steps, prod, r) for r in cands), key=_dry_peak)
    pos = {st.target: i for i, st in enumerate(steps)}
    return tuple(pos[st.target] for st in best)


def evaluation_order(steps: Sequence[Step]) -> list[Step]:
    """Demand-driven topological order of ``steps`` (same steps, same results).

    Depth-first evaluation from the top-level outputs; among a few fixed root
    orders the one with the smallest dry-run memo peak is used.
    """
    steps = tuple(steps)
    return [steps[i] for i in _best_permutation(steps)]


def _execute(
    steps: Sequence[Step],
    n: int,
    seed: int | None,
    given: Mapping[VariableVertex, np.ndarray],
    keep: Iterable[VariableVertex],
    fixed: Mapping[VariableVertex, np.ndarray] | None = None,
) -> tuple[dict[VariableVertex, np.ndarray], Workspace]:
    keep = list(keep)
    ws = Workspace(steps, keep)
    for st in evaluation_order(steps):
        if st.kind == "given":
            col = np.broadcast_to(np.asarray(given[st.target], dtype=float), (n,)).copy()
        elif st.kind == "seed":
            if fixed is not None and st.target in fixed:
                col = np.broadcast_to(np.asarray(fixed[st.target], dtype=float), (n,)).copy()
            else:
                col = source_uniforms(seed, st.target, n)
        elif st.kind == "h":
            cv = st.copula
            left, right = (ws.memo[v] for v in st.inputs)
            cop = _copula(cv)
            if st.target.conditioned == cv.left:
                col = cop.hfunc1(left, right)
            else:
                col = cop.hfunc2(left, right)
            ws.hcall_counter += 1
        else:
            cv = st.copula
            p, other = (ws.memo[v] for v in st.inputs)
            cop = _copula(cv)
            if st.target.conditioned == cv.left:
                col = cop.hinv1(p, other)
            else:
                col = cop.hinv2(p, other)
            ws.hinv_counter += 1
            ws.hinv_copulas.append(cv)
        for v in st.inputs:
            ws.release(v)
        ws.put(st.target, _clip(np.asarray(col, dtype=float)))
    return {v: ws.results[v] for v in keep}, ws


def _resolve_order(m: VineModel, order, cond_set: Sequence[int] = ()) -> SamplingOrder:
    if order is None:
        if m.default_order is not None and tuple(sorted(m.cond_set)) == tuple(sorted(cond_set)):
            return SamplingOrder(m.default_order, m.d, tuple(cond_set))
        return schedule(m, cond_set)
    if isinstance(order, SamplingOrder):
        if tuple(cond_set) and tuple(sorted(order.cond_set)) != tuple(sorted(cond_set)):
            raise InfeasibleOrderError(
                f"order was scheduled for conditioning set {order.cond_set}, got {tuple(cond_set)}"
            )
        return SamplingOrder(order.order, m.d, tuple(cond_set) or order.cond_set)
    return SamplingOrder(tuple(order), m.d, tuple(cond_set))


def _top(m: VineModel) -> list[VariableVertex]:
    return [VariableVertex(j) for j in range(m.d)]


def sample(
    m: VineModel,
    n: int,
    order=None,
    seed: int = 0,
    return_workspace: bool = False,
):
    """Draw ``n`` rows from the vine copula.

    Args:
        m: fitted model.
        n: number of rows, at least 1.
        order: sampling order (tuple or :class:`SamplingOrder`); defaults to the
            model's stored order, else the scheduled one.
        seed: integer seed of the source-uniform streams.
        return_workspace: also return the :class:`Workspace` with call counters.

    Returns:
        ``n x d`` array in (0, 1), column ``j`` holding variable ``j``.
    """
    if int(n) < 1:
        raise DataError(f"n must be >= 1, got {n}")
    so = _resolve_order(m, order)
    steps = plan_sampling(m, get_source(so, m))
    cols, ws = _execute(steps, int(n), seed, {}, _top(m))
    out = np.column_stack([cols[v] for v in _top(m)])
    return (out, ws) if return_workspace else out


def _check_cond_values(m: VineModel, cond_values: Mapping[int, float]) -> dict[int, float]:
    vals = {}
    for k, x in cond_values.items():
        k = int(k)
        if not 0 <= k < m.d:
            raise DataError(f"conditioning variable {k} outside 0..{m.d - 1}")
        x = float(x)
        if not 0.0 < x < 1.0:
            raise DataError(f"conditioning value for variable {k} must lie in (0, 1), got {x!r}")
        vals[k] = x
    if not vals:
        raise DataError("cond_values must not be empty")
    return vals


def _conditional_plan(m: VineModel, cond_values, order):
    vals = _check_cond_values(m, cond_values)
    cond = tuple(sorted(vals))
    so = _resolve_order(m, order, cond)
    if set(so.order) | set(cond) != set(range(m.d)):
        raise InfeasibleOrderError(
            f"order {so} does not cover the {m.d - len(cond)} free variables given conditioning on {cond}"
        )
    given = {VariableVertex(k): x for k, x in vals.items()}
    steps = plan_sampling(m, get_source(so, m), given)
    return so, steps, given


def sample_conditional(
    m: VineModel,
    n: int,
    cond_values: Mapping[int, float],
    order=None,
    seed: int = 0,
    return_workspace: bool = False,
):
    """Draw ``n`` rows with the variables in ``cond_values`` held fixed.

    The order must list exactly the free variables; by default it is
    scheduled for ``cond_values``' keys.
    """
    if int(n) < 1:
        raise DataError(f"n must be >= 1, got {n}")
    _, steps, given = _conditional_plan(m, cond_values, order)
    cols, ws = _execute(steps, int(n), seed, given, _top(m))
    out = np.column_stack([cols[v] for v in _top(m)])
    for v, x in given.items():
        out[:, v.conditioned] = x
    return (out, ws) if return_workspace else out


def conditional_quantile(
    m: VineModel, cond_values: Mapping[int, float], alphas: Sequence[float], order=None
) -> np.ndarray:
    """Quantiles of the single free variable given ``cond_values``.

    Runs the conditional sampling traversal with the free variable's source
    column replaced by ``alphas``, so no Monte Carlo is involved.
    """
    alphas = np.asarray(alphas, dtype=float).ravel()
    if not np.all((alphas > 0.0) & (alphas < 1.0)):
        raise DataError("alphas must lie in (0, 1)")
    so, steps, given = _conditional_plan(m, cond_values, order)
    if len(so.order) != 1:
        raise InfeasibleOrderError(
            f"conditional_quantile needs exactly one free variable, got {len(so.order)}"
        )
    free = so.order[0]
    src = next(st.target for st in steps if st.kind == "seed" and st.target.conditioned == free)
    cols, _ = _execute(steps, alphas.size, None, given, _top(m), fixed={src: alphas})
    return cols[VariableVertex(free)]


def rosenblatt(m: VineModel, data, order=None) -> np.ndarray:
    """Forward Rosenblatt transform: the source-vertex values implied by ``data``.

    Column ``j`` of the result is the pseudo-observation at the source vertex
    of variable ``j``; applied to ``sample(m, n, order, seed)`` it returns the
    seeded uniforms.
    """
    u = np.asarray(data, dtype=float)
    if u.ndim != 2 or u.shape[1] != m.d:
        raise DataError(f"expected an n x {m.d} array, got shape {u.shape}")
    if not np.all((u > 0.0) & (u < 1.0)):
        raise DataError("data must lie strictly inside (0, 1)")
    so = _resolve_order(m, order)
    srcs = get_source(so, m)
    steps = plan_forward(m, srcs)
    given = {VariableVertex(j): u[:, j] for j in range(m.d)}
    cols, _ = _execute(steps, u.shape[0], None, given, srcs)
    out = np.empty_like(u)
    for v in srcs:
        out[:, v.conditioned] = cols[v]
    return out


def log_density(m: VineModel, data) -> np.ndarray:
    """Per-row log copula density, summed over all pair-copulas level by level."""
    u = np.atleast_2d(np.asarray(data, dtype=float))
    if u.shape[1] != m.d:
        raise DataError(f"expected an n x {m.d} array, got shape {u.shape}")
    level_obs = {VariableVertex(j): _clip(u[:, j]) for j in range(m.d)}
    total = np.zeros(u.shape[0])
    for k, level in enumerate(m.levels):
        nxt: dict[VariableVertex, np.ndarray] = {}
        for cv in level:
            cop = _copula(cv)
            a, b = (level_obs[p] for p in cv.parents)
            if not cop.is_independence:
                total += cop.log_pdf(a, b)
            if k + 1 < len(m.levels):
                ch_l, ch_r = cv.children
                nxt[ch_l] = _clip(np.asarray(cop.hfunc1(a, b)))
                nxt[ch_r] = _clip(np.asarray(cop.hfunc2(a, b)))
        level_obs = nxt
    return total
