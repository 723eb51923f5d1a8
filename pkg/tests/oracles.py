"""Independent reference implementations used only by the tests.

None of these import the code paths they check: the visit counter
re-implements the recursive traversal from scratch, the order search is brute
force over permutations, and the Gaussian oracles use plain linear algebra.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy import stats


# -- traversal ----------------------------------------------------------------


def _copula_index(copulas):
    """child (var, frozenset cond) -> (left, right, cond) of its producer."""
    prod = {}
    for left, right, cond in copulas:
        s = frozenset(cond)
        prod[(left, s | {right})] = (left, right, s)
        prod[(right, s | {left})] = (left, right, s)
    return prod


def sources_of(order, d, cond_set=()):
    rest = set(range(d)) - set(order)
    out = [(v, frozenset(order[i + 1 :]) | frozenset(rest)) for i, v in enumerate(order)]
    out += [(j, frozenset()) for j in sorted(rest)]
    return out


def count_visits(copulas, d, order, cond_set=()):
    """(h-calls, hinv-calls) of recursive inverse-Rosenblatt sampling.

    ``copulas`` is a list of ``(left, right, cond)``.  Returns None when the
    order implies a vertex the vine does not contain.
    """
    prod = _copula_index(copulas)
    srcs = sources_of(order, d, cond_set)
    for v, s in srcs:
        if s and (v, s) not in prod:
            return None
    visited = set()
    calls = {"h": 0, "hinv": 0}

    def down(v, s):
        if (v, s) in visited:
            return
        left, right, cond = prod[(v, s)]
        down_or_top(left, cond)
        down_or_top(right, cond)
        calls["h"] += 1
        visited.add((v, s))

    def down_or_top(v, s):
        if (v, s) in visited:
            return
        assert s, "top-level vertex requested before it was sampled"
        down(v, s)

    def up(v, s):
        left, right, cond = prod[(v, s)]
        other = right if v == left else left
        down_or_top(other, cond)
        calls["hinv"] += 1
        visited.add((v, cond))
        return cond

    for v, s in sorted(srcs, key=lambda t: (len(t[1]), t[0])):
        visited.add((v, s))
        while s:
            s = up(v, s)
    return calls["h"], calls["hinv"]


def feasible_orders(copulas, d, cond_set=()):
    """Every order of the free variables whose sources all exist."""
    free = [j for j in range(d) if j not in set(cond_set)]
    prod = _copula_index(copulas)
    for perm in permutations(free):
        srcs = sources_of(perm, d, cond_set)
        if all(not s or (v, s) in prod for v, s in srcs):
            yield perm


def exhaustive_min(copulas, d, cond_set=()):
    """Minimum h-calls over every feasible order; also the count of such orders."""
    best, n = None, 0
    for perm in feasible_orders(copulas, d, cond_set):
        h, _ = count_visits(copulas, d, perm, cond_set)
        n += 1
        best = h if best is None else min(best, h)
    return best, n


# -- spanning trees -----------------------------------------------------------


def prim_weight(w: np.ndarray) -> float:
    """Total weight of a maximum spanning tree of a dense symmetric matrix."""
    d = w.shape[0]
    in_tree = [0]
    total = 0.0
    while len(in_tree) < d:
        best = None
        for a in in_tree:
            for b in range(d):
                if b in in_tree:
                    continue
                if best is None or w[a, b] > best[0]:
                    best = (w[a, b], b)
        total += best[0]
        in_tree.append(best[1])
    return total


def connected(n_nodes, edges, x, y) -> bool:
    adj = {i: set() for i in range(n_nodes)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {x}, [x]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return y in seen


# -- Gaussian vines -------------------------------------------------------------


def gaussian_vine_corr(d, pcorr):
    """Correlation matrix of a Gaussian vine from its partial correlations.

    ``pcorr`` maps ``(left, right, cond)`` to the partial correlation; edges
    must be supplied for every pair.  Levels are processed in order so that the
    blocks needed for each pair are already known.
    """
    R = np.eye(d)
    for (a, b, cond), rho in sorted(pcorr.items(), key=lambda t: len(t[0][2])):
        S = list(cond)
        if not S:
            R[a, b] = R[b, a] = rho
            continue
        Rss_inv = np.linalg.inv(R[np.ix_(S, S)])
        ra, rb = R[a, S], R[b, S]
        va = 1.0 - ra @ Rss_inv @ ra
        vb = 1.0 - rb @ Rss_inv @ rb
        R[a, b] = R[b, a] = rho * np.sqrt(va * vb) + ra @ Rss_inv @ rb
    return R


def gaussian_copula_logpdf(u: np.ndarray, R: np.ndarray) -> np.ndarray:
    z = stats.norm.ppf(u)
    Rinv = np.linalg.inv(R)
    _, logdet = np.linalg.slogdet(R)
    q = np.einsum("ij,jk,ik->i", z, Rinv - np.eye(R.shape[0]), z)
    return -0.5 * q - 0.5 * logdet


def gaussian_tau(rho):
    return 2.0 / np.pi * np.arcsin(rho)


def tau_std_error(rho: float, n: int, n_mc: int = 1000, seed: int = 7) -> float:
    """Asymptotic std error of Kendall's tau under a bivariate normal.

    Uses ``Var(tau_hat) ~ 16/n Var(2 C(U,V) - U - V)`` with the variance
    estimated on ``n_mc`` draws and the normal CDF from scipy.
    """
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    z = rng.multivariate_normal([0.0, 0.0], cov, size=n_mc)
    u = stats.norm.cdf(z)
    C = stats.multivariate_normal(mean=[0.0, 0.0], cov=cov).cdf(z)
    return float(np.sqrt(16.0 / n * np.var(2.0 * C - u[:, 0] - u[:, 1])))


def gaussian_conditional(R: np.ndarray, free: int, cond: list[int], z_cond: np.ndarray):
    """Mean and variance of the free normal score given the conditioning scores."""
    S = list(cond)
    w = R[free, S] @ np.linalg.inv(R[np.ix_(S, S)])
    return float(w @ z_cond), float(1.0 - w @ R[S, free])
