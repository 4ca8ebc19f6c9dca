"""Closed forms and exact samplers for the Ornstein-Uhlenbeck discount rate.

The discount rate follows ``dr = a (b - r) dt + delta dB``.  Everything here is
pure and vectorised over numpy arrays; samplers take their Gaussian draws as
arguments so no RNG state lives in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OUParams:
    """Parameters of the discount-rate process.

    Parameters
    ----------
    a : float
        Mean-reversion speed, must be positive.
    b : float
        Long-run level.
    delta : float
        Volatility, must be positive.
    r0 : float
        Initial rate.
    """

    a: float
    b: float
    delta: float
    r0: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"mean-reversion speed a must be > 0, got {self.a}")
        if not self.delta > 0:
            raise ValueError(f"volatility delta must be > 0, got {self.delta}")

    def tilde_b(self) -> float:
        return tilde_b(self)


@dataclass(frozen=True)
class DiscountAccumulator:
    """Accumulated ``int r du`` along a path segment; segments add up."""

    u_value: np.ndarray | float

    def __add__(self, other: "DiscountAccumulator") -> "DiscountAccumulator":
        return DiscountAccumulator(self.u_value + other.u_value)

    @property
    def discount(self):
        return np.exp(-np.asarray(self.u_value))


class AssumptionViolation(ValueError):
    """Raised when a quantity needs ``tilde_b > 0`` and the parameters break it."""


def tilde_b(params: OUParams) -> float:
    """Effective long-run level ``b - delta^2 / (2 a^2)``."""
    return params.b - params.delta**2 / (2.0 * params.a**2)


def require_positive_tilde_b(params: OUParams) -> float:
    tb = tilde_b(params)
    if not tb > 0:
        raise AssumptionViolation(
            f"tilde_b = b - delta^2/(2a^2) = {tb:.6g} must be > 0 "
            "(discounted values are infinite or unbounded otherwise)"
        )
    return tb


def _one_minus_exp(x):
    # 1 - e^{-x}, accurate for small x
    return -np.expm1(-x)


def log_discount_mgf(u, r, params: OUParams):
    """``ln E_r[exp(-int_0^u r_s ds)]``, computed without exponentiating."""
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(u < 0):
        raise ValueError("horizon u must be >= 0")
    a, d = params.a, params.delta
    tb = tilde_b(params)
    g = _one_minus_exp(a * u)
    out = -tb * u + (tb - r) / a * g - d**2 / (4.0 * a**3) * g**2
    return out[()] if out.ndim == 0 else out


def discount_mgf(u, r, params: OUParams):
    """Expected discount factor ``M(u, r) = E_r[exp(-int_0^u r_s ds)]``.

    Returns ``inf`` (with numpy's overflow warning silenced) when the log value
    exceeds the double range, which happens only for extremely negative ``r``.
    """
    with np.errstate(over="ignore"):
        return np.exp(log_discount_mgf(u, r, params))


def transition_moments(u, r, params: OUParams):
    """Mean and variance of ``r_u`` given ``r_0 = r``."""
    u = np.asarray(u, dtype=float)
    a, b, d = params.a, params.b, params.delta
    e = np.exp(-a * u)
    mean = r * e + b * (1.0 - e)
    var = d**2 / (2.0 * a) * _one_minus_exp(2.0 * a * u)
    return mean, var


def shifted_mean(u, r, params: OUParams):
    """Mean of the discount-tilted law of ``r_u``.

    Tilting the transition density by ``exp(-int r)`` shifts the Gaussian mean
    down by ``Cov(r_u, int r) = delta^2/(2a^2) (1 - e^{-au})^2``.
    """
    mean, _ = transition_moments(u, r, params)
    g = _one_minus_exp(params.a * np.asarray(u, dtype=float))
    return mean - params.delta**2 / (2.0 * params.a**2) * g**2


def shifted_density(z, u, r, params: OUParams):
    """Density ``phi(z, u, r)`` with ``E_r[e^{-U}; r_u in dz] = M(u, r) phi(z, u, r) dz``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("shifted_density needs u > 0")
    m = shifted_mean(u, r, params)
    _, var = transition_moments(u, r, params)
    return np.exp(-((z - m) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def sample_ou_exact(r, u, gaussian, params: OUParams):
    """One exact transition step of length ``u`` driven by a standard normal draw."""
    mean, var = transition_moments(u, r, params)
    return mean + np.sqrt(var) * gaussian


def integral_moments(u, r, params: OUParams):
    """Joint Gaussian moments of ``(r_u, int_0^u r_s ds)`` from ``r_0 = r``.

    Returns ``(mean_r, mean_int, var_r, var_int, cov)``.
    """
    u = np.asarray(u, dtype=float)
    a, b, d = params.a, params.b, params.delta
    g1 = _one_minus_exp(a * u)
    g2 = _one_minus_exp(2.0 * a * u)
    mean_r, var_r = transition_moments(u, r, params)
    mean_int = (r - b) * g1 / a + b * u
    var_int = d**2 / a**2 * (u - 2.0 * g1 / a + g2 / (2.0 * a))
    cov = d**2 / (2.0 * a**2) * g1**2
    return mean_r, mean_int, var_r, np.maximum(var_int, 0.0), cov


def sample_ou_with_integral(r, u, gaussians, params: OUParams):
    """Exact joint draw of ``(r_u, int_0^u r_s ds)``.

    ``gaussians`` is a pair ``(g1, g2)`` of independent standard normals (arrays
    allowed); they are correlated here through a Cholesky factor.
    """
    g1, g2 = gaussians
    mean_r, mean_int, var_r, var_int, cov = integral_moments(u, r, params)
    sd_r = np.sqrt(var_r)
    load = np.divide(cov, sd_r, out=np.zeros_like(np.asarray(sd_r, dtype=float)), where=sd_r > 0)
    resid = np.sqrt(np.maximum(var_int - load**2, 0.0))
    return mean_r + sd_r * g1, DiscountAccumulator(mean_int + load * g1 + resid * g2)


def mgf_pde_residual(u, r, h, params: OUParams):
    """Central-difference residual of ``-M_u + a(b-r) M_r + delta^2/2 M_rr - r M``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    if not u > h:
        raise ValueError(f"need u > h for a central difference in u (u={u}, h={h})")
    m = lambda uu, rr: discount_mgf(uu, rr, params)  # noqa: E731
    m0 = m(u, r)
    m_u = (m(u + h, r) - m(u - h, r)) / (2 * h)
    m_r = (m(u, r + h) - m(u, r - h)) / (2 * h)
    m_rr = (m(u, r + h) - 2 * m0 + m(u, r - h)) / h**2
    a, b, d = params.a, params.b, params.delta
    return float(-m_u + a * (b - r) * m_r + 0.5 * d**2 * m_rr - r * m0)
