"""Stochastic horizon: first passage of the healthy surplus and its discount factor.

The horizon is the first time the reference surplus ``z + (mu - zeta) t + sigma W_t``
hits zero.  It is independent of the rate, so the expected discount to the
horizon is the one-dimensional integral

    phi(r, z) = int_0^inf M(t, r) f(t; z) dt,

which is what decides between paying and waiting in this setting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .barrier import Decision
from .ou_kernel import OUParams, discount_mgf, require_positive_tilde_b
from .quadrature import QuadratureConfig, adaptive_gauss_legendre

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HealthyParams:
    """Reference payout rate ``zeta`` and initial healthy surplus ``z0 = x - l``."""

    zeta: float
    z0: float

    def validate_against(self, mu: float) -> None:
        if not 0 <= self.zeta <= mu:
            raise ValueError(f"reference rate must satisfy 0 <= zeta <= mu, got zeta={self.zeta}, mu={mu}")
        if not self.z0 > 0:
            raise ValueError(f"initial healthy surplus z0 = x - l must be > 0, got {self.z0}")


class DegenerateLawError(ValueError):
    pass


@dataclass(frozen=True)
class FirstPassageLaw:
    """Hitting time of zero for ``z + drift t + sigma W_t``."""

    drift: float
    sigma: float
    z: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegenerateLawError(f"sigma must be > 0, got {self.sigma}")
        if self.z < 0:
            raise ValueError(f"starting level must be >= 0, got {self.z}")

    def at(self, z: float) -> "FirstPassageLaw":
        return replace(self, z=z)


def first_passage_density(t, law: FirstPassageLaw):
    """Density of the hitting time at ``t > 0``.

    Note the sign: with positive drift the path moves *away* from zero, so the
    exponent is ``-(z + drift t)^2 / (2 sigma^2 t)`` and the total mass is
    ``exp(-2 drift z / sigma^2)`` rather than one.
    """
    t = np.asarray(t, dtype=float)
    if law.z <= 0:
        raise ValueError("density needs z > 0")
    if np.any(t <= 0):
        raise ValueError("density needs t > 0")
    z, m, s = law.z, law.drift, law.sigma
    return z / (math.sqrt(2 * math.pi) * s * t**1.5) * np.exp(-((z + m * t) ** 2) / (2 * s * s * t))


def first_passage_cdf(t, law: FirstPassageLaw):
    """``P[tau <= t]`` in closed form (reflection principle with drift)."""
    t = np.asarray(t, dtype=float)
    z, m, s = law.z, law.drift, law.sigma
    if z == 0:
        return np.ones_like(t)
    st = s * np.sqrt(t)
    return ndtr(-(z + m * t) / st) + math.exp(-2 * m * z / s**2) * ndtr((-z + m * t) / st)


def survival_probability(law: FirstPassageLaw) -> float:
    """``P[tau = inf]``: the healthy surplus never reaches zero."""
    m, z, s = law.drift, law.z, law.sigma
    return float(-math.expm1(-(m * z + abs(m) * z) / s**2))


def first_passage_mass(law: FirstPassageLaw, q=QuadratureConfig()) -> float:
    """``P[tau < inf]`` by quadrature of the density.

    The upper limit is pushed out until the crude tail bound
    ``2 z / (sigma sqrt(2 pi T)) exp(-drift z / sigma^2 - drift^2 T / (2 sigma^2))`` drops below
    ``abs_tol``; panels double in length so the ``t^{-3/2}`` tail is resolved.
    """
    z, s = law.z, law.sigma
    if z == 0:
        return 1.0
    scale = (z / s) ** 2
    t_cap = scale
    while 2 * z / (s * math.sqrt(2 * math.pi * t_cap)) * math.exp(-law.drift * z / s**2 - law.drift**2 * t_cap / (2 * s * s)) > 0.1 * q.abs_tol:
        t_cap *= 2
    bps = scale * 2.0 ** np.arange(-12, 1 + int(math.log2(t_cap / scale)))
    res = adaptive_gauss_legendre(
        lambda t: first_passage_density(t, law), 0.0, t_cap, q.rel_tol, q.abs_tol,
        max(q.max_subdivisions, 4 * len(bps)), breakpoints=bps,
    )
    return res.value


def _tail_cap(r, ou: OUParams, abs_tol: float) -> float:
    # M(t, r) <= exp(-tb t) * exp(max(tb - r, 0) / a); the density mass is <= 1
    tb = require_positive_tilde_b(ou)
    log_c = max(tb - r, 0.0) / ou.a
    return max(log_c - math.log(abs_tol), 1.0) / tb


def horizon_discount(r, z, ou: OUParams, law: FirstPassageLaw, q=QuadratureConfig()) -> float:
    """``phi(r, z) = E[M(tau, r); tau < inf]`` for the hitting time from level ``z``.

    Paths that never hit contribute nothing because ``M(t, r) -> 0``.
    ``phi(r, 0) = 1``.
    """
    require_positive_tilde_b(ou)
    if z < 0:
        raise ValueError("z must be >= 0")
    if z == 0:
        return 1.0
    lw = law.at(z)
    t_max = _tail_cap(r, ou, q.abs_tol)
    log.debug("horizon_discount tail cap t_max=%.4g for r=%.4g", t_max, r)
    scale = (z / lw.sigma) ** 2
    k = np.arange(-12, 80)
    bps = scale * 2.0 ** k
    bps = np.concatenate([bps[bps < t_max], [t_max]])

    def integrand(t):
        return discount_mgf(t, r, ou) * first_passage_density(t, lw)

    res = adaptive_gauss_legendre(
        integrand, 0.0, t_max, q.rel_tol, q.abs_tol, max(q.max_subdivisions, 4 * len(bps)), breakpoints=bps
    )
    return res.value


def horizon_discount_convolution(s, r_s, ou: OUParams, law: FirstPassageLaw, q=QuadratureConfig()) -> float:
    """``int_s^inf M(t - s, r_s) f(t; z0) dt`` with the time-zero density from ``law.z``.

    This is the literal convolution form of the barrier condition; it does not
    condition on survival up to ``s``.  Kept as a diagnostic next to the
    state-based :func:`horizon_discount`.
    """
    require_positive_tilde_b(ou)
    t_max = s + _tail_cap(r_s, ou, q.abs_tol)
    scale = (law.z / law.sigma) ** 2
    bps = scale * 2.0 ** np.arange(-12, 80)
    bps = np.concatenate([[s], bps[(bps > s) & (bps < t_max)], [t_max]])

    def integrand(t):
        return discount_mgf(t - s, r_s, ou) * first_passage_density(t, law)

    return adaptive_gauss_legendre(
        integrand, s, t_max, q.rel_tol, q.abs_tol, max(q.max_subdivisions, 4 * len(bps)), breakpoints=bps
    ).value


def theta_n(n, law: FirstPassageLaw, ou: OUParams):
    """Exponent with ``E[exp(-(a n + tilde_b) tau)] = exp(theta_n z)``."""
    tb = require_positive_tilde_b(ou)
    m, s = law.drift, law.sigma
    n = np.asarray(n, dtype=float)
    return (-m - np.sqrt(m * m + 2 * s * s * (ou.a * n + tb))) / s**2


@dataclass(frozen=True)
class SeriesResult:
    value: float
    last_term: float
    diverged: bool


def horizon_discount_series(r, z, law: FirstPassageLaw, ou: OUParams, n_terms: int = 60, tol: float = 1e-10) -> SeriesResult:
    """Power-series evaluation of ``phi(r, z)`` truncated after ``n_terms`` terms.

    Expanding ``M(t, r)`` in powers of ``e^{-a t}`` turns the expectation into a
    sum of Laplace transforms of the hitting time.  The series is entire but
    alternates; for strongly negative ``r`` the terms grow before they shrink
    and cancellation ruins the sum.  ``diverged`` flags both a tail that has not
    decayed below ``tol`` and a cancellation loss of more than six digits.
    """
    tb = require_positive_tilde_b(ou)
    a, d = ou.a, ou.delta
    lead = (tb - r - d * d / (4 * a * a)) / a
    beta = (tb - r - d * d / (2 * a * a)) / a
    quad = d * d / (4 * a**3)
    thetas = theta_n(np.arange(n_terms + 1), law, ou)
    terms = []
    for n in range(n_terms + 1):
        c = 0.0
        for k in range(n // 2 + 1):
            c += (-1) ** (n - k) / (math.factorial(k) * math.factorial(n - 2 * k)) * beta ** (n - 2 * k) * quad**k
        terms.append(math.exp(thetas[n] * z) * c)
    terms = np.array(terms) * math.exp(lead)
    value = float(terms.sum())
    last = float(abs(terms[-1]))
    scale = max(1.0, abs(value))
    cancellation = float(np.abs(terms).max()) / scale
    tail = np.abs(terms[-5:])
    diverged = bool(last > tol * scale or cancellation > 1e6 or not np.all(np.isfinite(terms)) or np.any(np.diff(tail) > 0) and last > tol * scale)
    return SeriesResult(value, last, diverged)


@dataclass(frozen=True)
class BarrierLevel:
    """Root ``z*`` of ``phi(r, z) = 1``.

    ``status`` is ``"root"``, ``"pay_everywhere"`` (phi < 1 on every probe,
    ``z`` is None) or ``"bracket_exhausted"`` (phi >= 1 up to the largest probe,
    ``z`` is that probe).
    """

    r: float
    z: float | None
    status: str
    detail: str = ""

    @property
    def found(self) -> bool:
        return self.status == "root"


def probe_levels(law: FirstPassageLaw, ou: OUParams) -> np.ndarray:
    tb = require_positive_tilde_b(ou)
    z_hi = 50 * law.sigma**2 / max(abs(law.drift), law.sigma * math.sqrt(2 * tb))
    z = [1e-6]
    while z[-1] * 2 < z_hi:
        z.append(z[-1] * 2)
    z.append(z_hi)
    return np.array(z)


def barrier_level(r, law: FirstPassageLaw, ou: OUParams, q=QuadratureConfig(), xtol: float = 1e-12) -> BarrierLevel:
    """Level ``z*(r)`` where waiting and paying are indifferent."""
    zs = probe_levels(law, ou)
    excess = np.array([horizon_discount(r, z, ou, law, q) - 1.0 for z in zs])
    above = excess >= 0
    if not above.any():
        return BarrierLevel(r, None, "pay_everywhere", f"phi < 1 on {len(zs)} probes up to z={zs[-1]:.4g}")
    if above.all():
        return BarrierLevel(r, float(zs[-1]), "bracket_exhausted", f"phi >= 1 up to z={zs[-1]:.4g}")
    downs = np.flatnonzero(above[:-1] & ~above[1:])
    if len(downs) == 0:
        # phi < 1 near zero, >= 1 only at the top probe
        return BarrierLevel(r, float(zs[-1]), "bracket_exhausted", "phi crosses 1 upward only")
    k = downs[-1]
    detail = "" if len(downs) == 1 and not above[k + 1:].any() else f"{len(downs)} downward crossings; using the last"
    z_star = brentq(lambda z: horizon_discount(r, z, ou, law, q) - 1.0, zs[k], zs[k + 1], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return BarrierLevel(r, float(z_star), "root", detail)


def policy_stochastic(r, z, ou: OUParams, law: FirstPassageLaw, q=QuadratureConfig()) -> Decision:
    """Pay iff the expected discount to the horizon is below one; ties wait."""
    return Decision.PAY if horizon_discount(r, z, ou, law, q) < 1.0 else Decision.WAIT


@dataclass(frozen=True)
class StochasticBarrierTable:
    """Tabulated ``z*(r)`` for fast vectorised decisions inside simulations.

    For ``r >= 0`` the rule is always pay.  Below ``r_grid[0]`` the first entry is
    used.  Rates with no root pay everywhere (``z_star = -inf``).
    """

    r_grid: np.ndarray
    z_star: np.ndarray

    def pay(self, r, z):
        r = np.asarray(r, dtype=float)
        zs = np.interp(r, self.r_grid, self.z_star)
        return (r >= 0) | (z > zs)


def build_barrier_table(ou: OUParams, law: FirstPassageLaw, r_min: float, n: int = 60, q=QuadratureConfig()) -> StochasticBarrierTable:
    r_grid = np.linspace(r_min, 0.0, n + 1)[:-1]
    z_star = np.empty(n)
    for i, r in enumerate(r_grid):
        lvl = barrier_level(r, law, ou, q)
        z_star[i] = -np.inf if lvl.z is None else lvl.z
    # interp cannot carry -inf through a linear blend; clamp to a level that is never reached
    z_star = np.where(np.isfinite(z_star), z_star, -1.0)
    return StochasticBarrierTable(np.append(r_grid, 0.0), np.append(z_star, -1.0))
