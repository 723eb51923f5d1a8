"""Parametric bivariate copulas.

Every family is implemented through four unrotated kernels (log-density, CDF,
the h-function ``h1(u, v) = dC/dv`` and its inverse in ``u``).  All listed
families are exchangeable, so ``h2(u, v) = h1(v, u)``; rotations by 90, 180 and
270 degrees are derived from the unrotated kernels by reflecting arguments.

Uniform inputs are clipped to ``[EPS, 1 - EPS]`` before any kernel is
evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy import integrate, optimize, special

from .errors import DataError, DomainError, NumericError

__all__ = [
    "EPS",
    "CopulaFamily",
    "BivariateCopula",
    "INDEPENDENCE",
    "ALL_FAMILIES",
    "tau_to_theta",
    "theta_to_tau",
    "fit",
]

EPS = 1e-14
TAU_MAX = 0.999
_HINV_TOL = 1e-10
_HINV_MAXITER = 100


class CopulaFamily(str, Enum):
    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"


ALL_FAMILIES = frozenset(CopulaFamily)
_ASYMMETRIC = (CopulaFamily.CLAYTON, CopulaFamily.GUMBEL)
_ROTATIONS = (0, 90, 180, 270)


def _clip(x) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


def _scalar_or_array(x: np.ndarray):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# unrotated kernels, theta always inside the family's native range
# ---------------------------------------------------------------------------


def _bvn_cdf(h: np.ndarray, k: np.ndarray, rho: float) -> np.ndarray:
    """Standard bivariate normal CDF through Owen's T function."""
    s = math.sqrt(1.0 - rho * rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_h = np.where(h == 0.0, np.copysign(np.inf, k - rho * h), (k - rho * h) / (h * s))
        a_k = np.where(k == 0.0, np.copysign(np.inf, h - rho * k), (h - rho * k) / (k * s))
    hk = h * k
    beta = np.where((hk > 0) | ((hk == 0) & (h + k >= 0)), 0.0, 0.5)
    out = (
        0.5 * (special.ndtr(h) + special.ndtr(k))
        - special.owens_t(h, a_h)
        - special.owens_t(k, a_k)
        - beta
    )
    both_zero = (h == 0.0) & (k == 0.0)
    out = np.where(both_zero, 0.25 + math.asin(rho) / (2.0 * math.pi), out)
    return np.clip(out, 0.0, 1.0)


def _gauss_logpdf(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    r2 = 1.0 - rho * rho
    return -0.5 * math.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)


def _gauss_cdf(u, v, rho):
    return _bvn_cdf(special.ndtri(u), special.ndtri(v), rho)


def _gauss_h1(u, v, rho):
    s = math.sqrt(1.0 - rho * rho)
    return special.ndtr((special.ndtri(u) - rho * special.ndtri(v)) / s)


def _gauss_hinv1(p, v, rho):
    s = math.sqrt(1.0 - rho * rho)
    return special.ndtr(special.ndtri(p) * s + rho * special.ndtri(v))


def _clayton_log_gen_sum(u, v, theta):
    # log(u^-theta + v^-theta - 1), stable for tiny u, v and large theta
    x = -theta * np.log(u)
    y = -theta * np.log(v)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    return hi + np.log1p(np.exp(lo - hi) - np.exp(-hi))


def _clayton_logpdf(u, v, theta):
    lg = _clayton_log_gen_sum(u, v, theta)
    return math.log1p(theta) - (theta + 1.0) * (np.log(u) + np.log(v)) - (1.0 / theta + 2.0) * lg


def _clayton_cdf(u, v, theta):
    return np.exp(-_clayton_log_gen_sum(u, v, theta) / theta)


def _clayton_h1(u, v, theta):
    lg = _clayton_log_gen_sum(u, v, theta)
    return np.exp(-(theta + 1.0) * np.log(v) - (1.0 / theta + 1.0) * lg)


def _clayton_hinv1(p, v, theta):
    a = -theta * np.log(v)
    b = np.expm1(-theta / (theta + 1.0) * np.log(p))
    return np.exp(-np.logaddexp(0.0, a + np.log(b)) / theta)


def _gumbel_log_a(x, y, theta):
    return np.logaddexp(theta * np.log(x), theta * np.log(y)) / theta


def _gumbel_logpdf(u, v, theta):
    x, y = -np.log(u), -np.log(v)
    log_a = _gumbel_log_a(x, y, theta)
    a = np.exp(log_a)
    return (
        -a
        + x
        + y
        + (theta - 1.0) * (np.log(x) + np.log(y))
        + (1.0 - 2.0 * theta) * log_a
        + np.log(a + theta - 1.0)
    )


def _gumbel_cdf(u, v, theta):
    x, y = -np.log(u), -np.log(v)
    return np.exp(-np.exp(_gumbel_log_a(x, y, theta)))


def _gumbel_h1(u, v, theta):
    x, y = -np.log(u), -np.log(v)
    log_a = _gumbel_log_a(x, y, theta)
    return np.exp(-np.exp(log_a) + (1.0 - theta) * log_a + (theta - 1.0) * np.log(y) + y)


def _frank_bracket(u, v, theta):
    # e^{theta*min(u,v)} * (e^{-theta u} + e^{-theta v} - e^{-theta(u+v)} - e^{-theta}), in (0, 2]
    m = np.minimum(u, v)
    big = np.maximum(u, v)
    return -np.expm1(-theta * big) + np.exp(-theta * (big - m)) - np.exp(-theta * (1.0 - m))


def _frank_logpdf(u, v, theta):
    m = np.minimum(u, v)
    b = _frank_bracket(u, v, theta)
    return (
        math.log(theta)
        + math.log(-math.expm1(-theta))
        - theta * (u + v)
        + 2.0 * theta * m
        - 2.0 * np.log(b)
    )


def _frank_cdf(u, v, theta):
    a = np.expm1(-theta * u)
    b = np.expm1(-theta * v)
    # log1p(-1) = -inf is the correct limit at the upper boundary
    with np.errstate(divide="ignore"):
        return -np.log1p(a * b / math.expm1(-theta)) / theta


def _frank_h1(u, v, theta):
    m = np.minimum(u, v)
    return np.exp(-theta * (v - m)) * -np.expm1(-theta * u) / _frank_bracket(u, v, theta)


def _frank_hinv1(p, v, theta):
    a = p * math.expm1(-theta) / (np.exp(-theta * v) * (1.0 - p) + p)
    with np.errstate(divide="ignore"):
        return -np.log1p(a) / theta


def _newton_hinv(h1, logpdf, p, v, theta, family):
    """Safeguarded Newton for ``h1(u, v) = p`` in ``u`` with bisection fallback."""
    p, v = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(v, dtype=float))
    p = p.astype(float).ravel()
    v = v.astype(float).ravel()
    lo = np.full_like(p, EPS)
    hi = np.full_like(p, 1.0 - EPS)
    x = p.copy()
    done = np.zeros(p.shape, dtype=bool)
    for _ in range(_HINV_MAXITER):
        act = ~done
        if not act.any():
            break
        xa, va, pa = x[act], v[act], p[act]
        f = h1(xa, va, theta) - pa
        lo_a = np.where(f < 0, xa, lo[act])
        hi_a = np.where(f > 0, xa, hi[act])
        dens = np.exp(logpdf(xa, va, theta))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / dens
        xn = xa - step
        bad = ~np.isfinite(xn) | (xn <= lo_a) | (xn >= hi_a)
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        conv = (np.abs(f) <= 1e-13) | (hi_a - lo_a <= _HINV_TOL * 1e-4) | (np.abs(xn - xa) <= 1e-16)
        x[act] = np.where(np.abs(f) <= 1e-13, xa, xn)
        lo[act], hi[act] = lo_a, hi_a
        done[act] = conv
    if not done.all():
        i = int(np.flatnonzero(~done)[0])
        raise NumericError(
            f"h-inverse for {family.value} did not converge after {_HINV_MAXITER} iterations "
            f"(p={p[i]!r}, v={v[i]!r})"
        )
    return x


# ---------------------------------------------------------------------------
# Kendall's tau <-> parameter
# ---------------------------------------------------------------------------


def _debye_integral(theta: float) -> float:
    # int_0^theta t / (e^t - 1) dt for theta > 0; integrand negligible beyond 60
    upper = min(theta, 60.0)
    val, _ = integrate.quad(
        lambda t: t * math.exp(-t) / -math.expm1(-t) if t > 0 else 1.0,
        0.0,
        upper,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    return val


def _frank_tau(theta: float) -> float:
    if theta == 0.0:
        return 0.0
    a = abs(theta)
    if a < 1e-4:
        tau = a / 9.0 - a**3 / 900.0
    else:
        tau = 1.0 - 4.0 / a + 4.0 * _debye_integral(a) / (a * a)
    return math.copysign(tau, theta)


def _frank_dtau(theta: float) -> float:
    a = theta
    if a < 1e-4:
        return 1.0 / 9.0 - a * a / 300.0
    return 4.0 / a**2 + 4.0 / (a * math.expm1(a)) - 8.0 * _debye_integral(a) / a**3


def _frank_theta(tau: float) -> float:
    target = abs(tau)
    if target == 0.0:
        raise DomainError("frank: tau must be nonzero (theta = 0 is excluded)")
    lo, hi = 0.0, 1.0
    while _frank_tau(hi) < target:
        lo, hi = hi, hi * 2.0
    x = 9.0 * target if 9.0 * target < hi else 0.5 * (lo + hi)
    for _ in range(200):
        f = _frank_tau(x) - target
        if abs(f) < 1e-13:
            break
        if f < 0:
            lo = x
        else:
            hi = x
        xn = x - f / _frank_dtau(x)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < 1e-14 * max(1.0, x):
            x = xn
            break
        x = xn
    return math.copysign(x, tau)


def _negates_tau(rotation: int) -> bool:
    return rotation in (90, 270)


def theta_to_tau(family: CopulaFamily | str, rotation: int, theta: float) -> float:
    """Kendall's tau implied by ``theta`` for a (rotated) family."""
    family = CopulaFamily(family)
    if family is CopulaFamily.INDEPENDENCE:
        return 0.0
    if family is CopulaFamily.GAUSSIAN:
        tau = 2.0 * math.asin(theta) / math.pi
    elif family is CopulaFamily.CLAYTON:
        tau = theta / (theta + 2.0)
    elif family is CopulaFamily.GUMBEL:
        tau = 1.0 - 1.0 / theta
    else:
        tau = _frank_tau(theta)
    return -tau if _negates_tau(rotation) else tau


def tau_to_theta(family: CopulaFamily | str, rotation: int, tau: float) -> float:
    """Invert the Kendall's tau map of a (rotated) family.

    Raises:
        DomainError: if ``tau`` is not attainable by the family and rotation.
    """
    family = CopulaFamily(family)
    tau = float(tau)
    if not abs(tau) <= TAU_MAX:
        raise DomainError(f"{family.value}: |tau| must be <= {TAU_MAX}, got {tau!r}")
    _check_rotation(family, rotation)
    if family is CopulaFamily.INDEPENDENCE:
        if tau != 0.0:
            raise DomainError(f"independence: tau must be 0, got {tau!r}")
        return 0.0
    if family is CopulaFamily.GAUSSIAN:
        return math.sin(math.pi * tau / 2.0)
    if family is CopulaFamily.FRANK:
        return _frank_theta(tau)
    base = -tau if _negates_tau(rotation) else tau
    if family is CopulaFamily.CLAYTON:
        if base <= 0.0:
            raise DomainError(
                f"clayton rotated {rotation}: tau {tau!r} outside attainable range "
                f"({'(-1, 0)' if _negates_tau(rotation) else '(0, 1)'})"
            )
        return 2.0 * base / (1.0 - base)
    if base < 0.0:
        raise DomainError(
            f"gumbel rotated {rotation}: tau {tau!r} outside attainable range "
            f"({'(-1, 0]' if _negates_tau(rotation) else '[0, 1)'})"
        )
    return 1.0 / (1.0 - base)


def _check_rotation(family: CopulaFamily, rotation: int) -> None:
    if rotation not in _ROTATIONS:
        raise DomainError(f"{family.value}: rotation must be one of {_ROTATIONS}, got {rotation!r}")
    if rotation != 0 and family not in _ASYMMETRIC:
        raise DomainError(f"{family.value}: only rotation 0 is allowed, got {rotation}")


def _check_theta(family: CopulaFamily, theta: float) -> None:
    if not math.isfinite(theta):
        raise DomainError(f"{family.value}: theta must be finite, got {theta!r}")
    if family is CopulaFamily.INDEPENDENCE:
        if theta != 0.0:
            raise DomainError(f"independence: takes no parameter (theta must be 0), got {theta!r}")
    elif family is CopulaFamily.GAUSSIAN:
        if not -1.0 < theta < 1.0:
            raise DomainError(f"gaussian: rho must lie in (-1, 1), got {theta!r}")
    elif family is CopulaFamily.CLAYTON:
        if not theta > 0.0:
            raise DomainError(f"clayton: theta must lie in (0, inf), got {theta!r}")
    elif family is CopulaFamily.GUMBEL:
        if not theta >= 1.0:
            raise DomainError(f"gumbel: theta must lie in [1, inf), got {theta!r}")
    elif theta == 0.0:
        raise DomainError("frank: theta must be nonzero")


# ---------------------------------------------------------------------------
# the copula value type
# ---------------------------------------------------------------------------

_KERNELS = {
    CopulaFamily.GAUSSIAN: (_gauss_logpdf, _gauss_cdf, _gauss_h1, _gauss_hinv1),
    CopulaFamily.CLAYTON: (_clayton_logpdf, _clayton_cdf, _clayton_h1, _clayton_hinv1),
    CopulaFamily.GUMBEL: (_gumbel_logpdf, _gumbel_cdf, _gumbel_h1, None),
    CopulaFamily.FRANK: (_frank_logpdf, _frank_cdf, _frank_h1, _frank_hinv1),
}


@dataclass(frozen=True)
class BivariateCopula:
    """An immutable pair-copula ``(family, rotation, theta)``.

    ``hfunc1(u, v)`` is the conditional CDF of the first argument given the
    second (``dC/dv``); ``hfunc2(u, v)`` the conditional CDF of the second
    argument given the first (``dC/du``).  ``hinv1(p, v)`` inverts ``hfunc1`` in
    ``u`` and ``hinv2(p, u)`` inverts ``hfunc2`` in ``v``.
    """

    family: CopulaFamily = CopulaFamily.INDEPENDENCE
    rotation: int = 0
    theta: float = 0.0

    def __post_init__(self):
        try:
            family = CopulaFamily(self.family)
        except ValueError:
            raise DomainError(f"unknown copula family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta", float(self.theta))
        _check_rotation(family, self.rotation)
        object.__setattr__(self, "rotation", int(self.rotation))
        _check_theta(family, self.theta)

    @classmethod
    def from_tau(cls, family: CopulaFamily | str, tau: float, rotation: int = 0) -> "BivariateCopula":
        return cls(family, rotation, tau_to_theta(family, rotation, tau))

    @property
    def tau(self) -> float:
        return theta_to_tau(self.family, self.rotation, self.theta)

    @property
    def is_independence(self) -> bool:
        return self.family is CopulaFamily.INDEPENDENCE

    def _base(self):
        """(kernels, base theta, effective rotation)."""
        if self.family is CopulaFamily.FRANK and self.theta < 0:
            # Frank is radially symmetric: C_{-t}(u, v) = v - C_t(1 - u, v)
            return _KERNELS[self.family], -self.theta, 90
        return _KERNELS[self.family], self.theta, self.rotation

    def _hinv_base(self, p, v, theta):
        kern = _KERNELS[self.family]
        if kern[3] is not None:
            return kern[3](p, v, theta)
        return _newton_hinv(kern[2], kern[0], p, v, theta, self.family)

    # -- density ---------------------------------------------------------

    def log_pdf(self, u, v):
        u, v = np.broadcast_arrays(_clip(u), _clip(v))
        if self.is_independence:
            return _scalar_or_array(np.zeros(u.shape))
        (logpdf, *_), theta, rot = self._base()
        if rot == 90:
            u = 1.0 - u
        elif rot == 180:
            u, v = 1.0 - u, 1.0 - v
        elif rot == 270:
            v = 1.0 - v
        return _scalar_or_array(logpdf(u, v, theta))

    def pdf(self, u, v):
        return _scalar_or_array(np.exp(self.log_pdf(u, v)))

    def loglik(self, u, v) -> float:
        return float(np.sum(self.log_pdf(u, v)))

    # -- distribution ------------------------------------------------------

    def cdf(self, u, v):
        u_raw, v_raw = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        u, v = _clip(u_raw), _clip(v_raw)
        if self.is_independence:
            val = u * v
        else:
            (_, cdf, *_), theta, rot = self._base()
            if rot == 0:
                val = cdf(u, v, theta)
            elif rot == 90:
                val = v - cdf(1.0 - u, v, theta)
            elif rot == 180:
                val = u + v - 1.0 + cdf(1.0 - u, 1.0 - v, theta)
            else:
                val = u - cdf(u, 1.0 - v, theta)
        val = np.clip(val, 0.0, 1.0)
        val = np.where(u_raw >= 1.0, np.clip(v_raw, 0.0, 1.0), val)
        val = np.where(v_raw >= 1.0, np.clip(u_raw, 0.0, 1.0), val)
        val = np.where((u_raw <= 0.0) | (v_raw <= 0.0), 0.0, val)
        return _scalar_or_array(val)

    # -- h-functions -------------------------------------------------------

    def _h1_rotated(self, u, v):
        (_, _, h1, _), theta, rot = self._base()
        if rot == 0:
            return h1(u, v, theta)
        if rot == 90:
            return 1.0 - h1(1.0 - u, v, theta)
        if rot == 180:
            return 1.0 - h1(1.0 - u, 1.0 - v, theta)
        return h1(u, 1.0 - v, theta)

    def _h2_rotated(self, u, v):
        # dC/du; unrotated families are exchangeable
        (_, _, h1, _), theta, rot = self._base()
        if rot == 0:
            return h1(v, u, theta)
        if rot == 90:
            return h1(v, 1.0 - u, theta)
        if rot == 180:
            return 1.0 - h1(1.0 - v, 1.0 - u, theta)
        return 1.0 - h1(1.0 - v, u, theta)

    def hfunc1(self, u, v):
        """Conditional CDF of the first argument given the second."""
        u_raw, v = np.broadcast_arrays(np.asarray(u, dtype=float), _clip(v))
        u = _clip(u_raw)
        val = u if self.is_independence else self._h1_rotated(u, v)
        val = np.clip(val, 0.0, 1.0)
        val = np.where(u_raw <= 0.0, 0.0, np.where(u_raw >= 1.0, 1.0, val))
        return _scalar_or_array(val)

    def hfunc2(self, u, v):
        """Conditional CDF of the second argument given the first."""
        u, v_raw = np.broadcast_arrays(_clip(u), np.asarray(v, dtype=float))
        v = _clip(v_raw)
        val = v if self.is_independence else self._h2_rotated(u, v)
        val = np.clip(val, 0.0, 1.0)
        val = np.where(v_raw <= 0.0, 0.0, np.where(v_raw >= 1.0, 1.0, val))
        return _scalar_or_array(val)

    def hinv1(self, p, v):
        """Solve ``hfunc1(u, v) = p`` for ``u``."""
        p, v = np.broadcast_arrays(_clip(p), _clip(v))
        shape = p.shape
        if self.is_independence:
            return _scalar_or_array(p.copy())
        _, theta, rot = self._base()
        p, v = p.ravel(), v.ravel()
        if rot == 0:
            u = self._hinv_base(p, v, theta)
        elif rot == 90:
            u = 1.0 - self._hinv_base(1.0 - p, v, theta)
        elif rot == 180:
            u = 1.0 - self._hinv_base(1.0 - p, 1.0 - v, theta)
        else:
            u = self._hinv_base(p, 1.0 - v, theta)
        return _scalar_or_array(_clip(u).reshape(shape))

    def hinv2(self, p, u):
        """Solve ``hfunc2(u, v) = p`` for ``v``."""
        p, u = np.broadcast_arrays(_clip(p), _clip(u))
        shape = p.shape
        if self.is_independence:
            return _scalar_or_array(p.copy())
        _, theta, rot = self._base()
        p, u = p.ravel(), u.ravel()
        if rot == 0:
            v = self._hinv_base(p, u, theta)
        elif rot == 90:
            v = self._hinv_base(p, 1.0 - u, theta)
        elif rot == 180:
            v = 1.0 - self._hinv_base(1.0 - p, 1.0 - u, theta)
        else:
            v = 1.0 - self._hinv_base(1.0 - p, u, theta)
        return _scalar_or_array(_clip(v).reshape(shape))

    def simulate(self, n: int, seed: int | None = None) -> np.ndarray:
        """Draw an ``n x 2`` sample by conditional inversion."""
        rng = np.random.default_rng(seed)
        u = rng.uniform(size=n)
        w = rng.uniform(size=n)
        return np.column_stack([u, self.hinv2(w, u)])

    def to_dict(self) -> dict:
        return {"family": self.family.value, "rotation": self.rotation, "theta": self.theta}

    def __str__(self) -> str:
        if self.is_independence:
            return "independence"
        rot = f" rot{self.rotation}" if self.rotation else ""
        return f"{self.family.value}{rot}(theta={self.theta:.6g})"


INDEPENDENCE = BivariateCopula()


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

_THETA_BOUNDS = {
    CopulaFamily.GAUSSIAN: (-0.9999, 0.9999),
    CopulaFamily.CLAYTON: (1e-6, 1998.0),
    CopulaFamily.GUMBEL: (1.0, 1000.0),
    CopulaFamily.FRANK: (-4000.0, 4000.0),
}


def _rotations_for(family: CopulaFamily, tau: float) -> tuple[int, ...]:
    if family in _ASYMMETRIC:
        return (0, 180) if tau > 0 else (90, 270)
    return (0,)


def _mle_refine(family, rotation, theta0, u, v) -> float:
    lo, hi = _THETA_BOUNDS[family]
    tau0 = theta_to_tau(family, rotation, theta0)
    # search window: +-0.25 in tau around the itau estimate, mapped to theta
    t_lo = max(-TAU_MAX, tau0 - 0.25)
    t_hi = min(TAU_MAX, tau0 + 0.25)
    cands = []
    for t in (t_lo, t_hi):
        try:
            cands.append(tau_to_theta(family, rotation, t))
        except DomainError:
            pass
    a = min(cands + [theta0]) if cands else lo
    b = max(cands + [theta0]) if cands else hi
    if family is CopulaFamily.CLAYTON:
        a = max(a, lo)
    if family is CopulaFamily.GUMBEL:
        a = max(a, 1.0)
    if family is CopulaFamily.FRANK:
        # never cross zero
        if theta0 > 0:
            a = max(a, 1e-6)
        else:
            b = min(b, -1e-6)

    def nll(theta):
        try:
            c = BivariateCopula(family, rotation, theta)
        except DomainError:
            return np.inf
        return -c.loglik(u, v)

    res = optimize.minimize_scalar(nll, bounds=(a, b), method="bounded", options={"xatol": 1e-8})
    return float(res.x) if res.fun <= nll(theta0) else theta0


def fit(
    obs,
    family_set: Iterable[CopulaFamily | str] = ALL_FAMILIES,
    method: str = "itau",
    independence_threshold: float = 0.01,
    tau: float | None = None,
) -> BivariateCopula:
    """Select and estimate a pair-copula from ``n x 2`` pseudo-observations.

    Each candidate family is estimated by Kendall's tau inversion (the rotation
    of Clayton/Gumbel follows the sign of tau); ``method="mle"`` refines the
    estimate by one-dimensional likelihood maximization. The candidate with the
    highest log-likelihood wins. Pairs whose empirical ``|tau|`` falls below
    ``independence_threshold`` are truncated to the independence copula.

    Args:
        obs: array of shape ``(n, 2)`` with entries in (0, 1).
        family_set: admissible families.
        method: ``"itau"`` or ``"mle"``.
        independence_threshold: truncation threshold on ``|tau|``.
        tau: precomputed empirical Kendall's tau, recomputed when omitted.
    """
    from .deptools import kendall_tau

    families = {CopulaFamily(f) for f in family_set}
    if not families:
        raise DomainError("family_set must not be empty")
    if method not in ("itau", "mle"):
        raise DomainError(f"unknown fit method {method!r}")
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise DataError(f"expected an (n, 2) array of pairs, got shape {obs.shape}")
    if obs.shape[0] < 10:
        raise DataError(f"need at least 10 observation pairs to fit, got {obs.shape[0]}")
    if not np.all((obs > 0.0) & (obs < 1.0)):
        raise DataError("pseudo-observations must lie strictly inside (0, 1)")
    u, v = obs[:, 0], obs[:, 1]
    if tau is None:
        tau = kendall_tau(u, v)
    if abs(tau) < independence_threshold or families == {CopulaFamily.INDEPENDENCE}:
        return INDEPENDENCE
    tau_c = float(np.clip(tau, -TAU_MAX, TAU_MAX))

    best, best_ll = None, -np.inf
    if CopulaFamily.INDEPENDENCE in families:
        best, best_ll = INDEPENDENCE, 0.0
    for family in sorted(families - {CopulaFamily.INDEPENDENCE}, key=lambda f: f.value):
        for rotation in _rotations_for(family, tau_c):
            try:
                theta = tau_to_theta(family, rotation, tau_c)
            except DomainError:
                continue
            lo, hi = _THETA_BOUNDS[family]
            theta = float(np.clip(theta, lo, hi))
            if method == "mle":
                theta = _mle_refine(family, rotation, theta, u, v)
            cop = BivariateCopula(family, rotation, theta)
            ll = cop.loglik(u, v)
            if ll > best_ll:
                best, best_ll = cop, ll
    if best is None:
        raise DomainError(f"no family in {sorted(f.value for f in families)} can represent tau={tau!r}")
    return best
