"""Closed-form value function for the fixed-horizon problem and its HJB checks.

The optimal value is ``v(t, r, x) = x M(T-t, r) + G(t, r)`` with

    G(t, r) = mu (T-t) M(T-t, r) + xi * gamma(t, r)

and ``gamma`` the double integral

    gamma(t, r) = int_0^{T-t} M(u, r) int_{alpha(t+u)}^inf (1 - M(T-t-u, z)) phi(z, u, r) dz du.

The outer integral runs in ``w`` with ``u = (T - t) w^2``, which spreads out the
boundary layer near ``u = 0``.  The inner integral uses a fixed composite
Gauss-Legendre rule in the standardised variable of ``phi``; being fixed, it
is smooth in ``(t, r)`` and finite differences of ``gamma`` stay clean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import Horizon, alpha
from .ou_kernel import (
    OUParams,
    discount_mgf,
    log_discount_mgf,
    require_positive_tilde_b,
    shifted_mean,
    transition_moments,
)
from .quadrature import (
    QuadratureConfig,
    QuadResult,
    adaptive_gauss_legendre,
    fixed_gauss_legendre,
    gl_rule,
)

_OUTER_ORDER = 10
_INNER_PANELS = 8
_INNER_ORDER = 16
_SMALL_U = 1e-6


@dataclass(frozen=True)
class SurplusParams:
    """Surplus drift ``mu``, volatility ``sigma`` and the payout cap ``xi``."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"surplus volatility sigma must be > 0, got {self.sigma}")
        if not self.xi > 0:
            raise ValueError(f"payout cap xi must be > 0, got {self.xi}")


@dataclass(frozen=True)
class ValuePoint:
    t: float
    r: float
    x: float
    v: float


def _check_time(t, horizon):
    if not 0 <= t <= horizon.T:
        raise ValueError(f"t must lie in [0, {horizon.T}], got {t}")


def value_max_payout(t, r, x, horizon: Horizon, ou: OUParams, s: SurplusParams, q=QuadratureConfig()):
    """Return of the strategy that always pays at rate ``xi``."""
    _check_time(t, horizon)
    require_positive_tilde_b(ou)
    tau = horizon.T - t
    res = adaptive_gauss_legendre(
        lambda u: discount_mgf(u, r, ou), 0.0, tau, q.rel_tol, q.abs_tol, q.max_subdivisions
    )
    return s.xi * res.value + discount_mgf(tau, r, ou) * (x + (s.mu - s.xi) * tau)


def never_pay_value(t, r, x, horizon: Horizon, ou: OUParams, s: SurplusParams):
    tau = horizon.T - t
    return discount_mgf(tau, r, ou) * (x + s.mu * tau)


def _inner_nodes():
    x, w = gl_rule(_INNER_ORDER)
    k = np.arange(_INNER_PANELS)[:, None]
    nodes = ((k + x[None, :]) / _INNER_PANELS).ravel()
    weights = np.tile(w / _INNER_PANELS, _INNER_PANELS)
    return nodes, weights


_S_NODES, _S_WEIGHTS = _inner_nodes()


def _inner_integral(u, t, r, T, ou: OUParams, trunc: float):
    """``int_{alpha(t+u)}^inf (1 - M(T-t-u, z)) phi(z, u, r) dz`` for an array of ``u``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    tiny = u < _SMALL_U
    if np.any(tiny):
        # the density collapses onto z = r
        lim = (1.0 - discount_mgf(T - t, r, ou)) if r > alpha(t, Horizon(T), ou) else 0.0
        out[tiny] = lim
    uu = u[~tiny]
    if uu.size:
        mean = shifted_mean(uu, r, ou)
        _, var = transition_moments(uu, r, ou)
        sd = np.sqrt(var)
        a_lo = alpha(np.minimum(t + uu, T), Horizon(T), ou)
        y_lo = np.clip((a_lo - mean) / sd, -trunc, trunc)
        span = trunc - y_lo
        y = y_lo[:, None] + span[:, None] * _S_NODES[None, :]
        z = mean[:, None] + sd[:, None] * y
        rest = np.maximum(T - t - uu, 0.0)[:, None]
        integrand = np.exp(-0.5 * y * y) / np.sqrt(2 * np.pi) * -np.expm1(log_discount_mgf(rest, z, ou))
        out[~tiny] = span * (integrand * _S_WEIGHTS[None, :]).sum(axis=1)
    return out


def _gamma_w_integrand(t, r, T, ou, trunc):
    tau = T - t

    def g(w):
        w = np.asarray(w, dtype=float)
        u = tau * w * w
        return 2.0 * tau * w * discount_mgf(u, r, ou) * _inner_integral(u, t, r, T, ou, trunc)

    return g


def gamma_result(t, r, horizon: Horizon, ou: OUParams, q=QuadratureConfig()) -> QuadResult:
    _check_time(t, horizon)
    require_positive_tilde_b(ou)
    if t == horizon.T:
        return QuadResult(0.0, 0.0, np.array([0.0, 1.0]))
    g = _gamma_w_integrand(t, r, horizon.T, ou, q.z_trunc_sigmas)
    return adaptive_gauss_legendre(
        g, 0.0, 1.0, q.rel_tol, q.abs_tol, q.max_subdivisions, order=_OUTER_ORDER,
        breakpoints=np.linspace(0.0, 1.0, 5),
    )


def gamma(t, r, horizon: Horizon, ou: OUParams, q=QuadratureConfig()) -> float:
    """Expected discounted excess ``E int (e^{-U_t^s} - e^{-U_t^T}) 1[r_s > alpha(s)] ds``."""
    return gamma_result(t, r, horizon, ou, q).value


def _gamma_on(partition, t, r, T, ou, trunc):
    if t >= T:
        return 0.0
    return fixed_gauss_legendre(_gamma_w_integrand(t, r, T, ou, trunc), partition, 2 * _OUTER_ORDER)


def tilde_G(t, r, horizon: Horizon, ou: OUParams, s: SurplusParams, q=QuadratureConfig()) -> float:
    tau = horizon.T - t
    return s.mu * tau * float(discount_mgf(tau, r, ou)) + s.xi * gamma(t, r, horizon, ou, q)


def value_function(t, r, x, horizon: Horizon, ou: OUParams, s: SurplusParams, q=QuadratureConfig()) -> ValuePoint:
    """Optimal value ``x M(T-t, r) + G(t, r)``; equals ``x`` at ``t = T``."""
    _check_time(t, horizon)
    require_positive_tilde_b(ou)
    if t == horizon.T:
        return ValuePoint(t, r, x, float(x))
    tau = horizon.T - t
    v = x * float(discount_mgf(tau, r, ou)) + tilde_G(t, r, horizon, ou, s, q)
    return ValuePoint(t, r, x, v)


def _check_stencil(t, r, h, horizon, ou):
    if not h > 0:
        raise ValueError("step h must be positive")
    if not h < t < horizon.T - h:
        raise ValueError(f"need h < t < T - h for the stencil (t={t}, h={h})")
    a_t = float(alpha(t, horizon, ou))
    if abs(r - a_t) <= 10 * h:
        raise ValueError(f"r={r} lies within 10h of the barrier alpha(t)={a_t:.6g}")
    return a_t


def _gamma_stencil(t, r, h, horizon, ou, q):
    """gamma at (t, r) and its four neighbours, all on the panels chosen at the centre."""
    part = gamma_result(t, r, horizon, ou, q).partition
    T, tr = horizon.T, q.z_trunc_sigmas
    return {
        (0, 0): _gamma_on(part, t, r, T, ou, tr),
        (1, 0): _gamma_on(part, t + h, r, T, ou, tr),
        (-1, 0): _gamma_on(part, t - h, r, T, ou, tr),
        (0, 1): _gamma_on(part, t, r + h, T, ou, tr),
        (0, -1): _gamma_on(part, t, r - h, T, ou, tr),
    }


def _generator(f, t, r, h, ou):
    """``f_t + a(b - r) f_r + delta^2/2 f_rr - r f`` from a five-point stencil dict."""
    f_t = (f[(1, 0)] - f[(-1, 0)]) / (2 * h)
    f_r = (f[(0, 1)] - f[(0, -1)]) / (2 * h)
    f_rr = (f[(0, 1)] - 2 * f[(0, 0)] + f[(0, -1)]) / h**2
    return f_t + ou.a * (ou.b - r) * f_r + 0.5 * ou.delta**2 * f_rr - r * f[(0, 0)]


def gamma_pde_residual(t, r, h, horizon: Horizon, ou: OUParams, q=QuadratureConfig()) -> float:
    """Residual of ``L(gamma) + 1[r > alpha(t)] (1 - M(T-t, r)) = 0`` by central differences."""
    a_t = _check_stencil(t, r, h, horizon, ou)
    require_positive_tilde_b(ou)
    g = _gamma_stencil(t, r, h, horizon, ou, q)
    source = (1.0 - float(discount_mgf(horizon.T - t, r, ou))) if r > a_t else 0.0
    return float(_generator(g, t, r, h, ou) + source)


def hjb_residual(t, r, x, h, horizon: Horizon, ou: OUParams, s: SurplusParams, q=QuadratureConfig()) -> float:
    """Residual of the HJB equation evaluated on the closed-form value function.

    ``t`` and ``r`` derivatives are central differences of ``v``; the ``x``
    derivatives use the exact linear structure ``v_x = M(T-t, r)``, ``v_xx = 0``.
    """
    _check_stencil(t, r, h, horizon, ou)
    require_positive_tilde_b(ou)
    g = _gamma_stencil(t, r, h, horizon, ou, q)
    T = horizon.T
    v = {}
    for (i, j), gv in g.items():
        tt, rr = t + i * h, r + j * h
        m = float(discount_mgf(T - tt, rr, ou))
        v[(i, j)] = (x + s.mu * (T - tt)) * m + s.xi * gv
    v_x = float(discount_mgf(T - t, r, ou))
    return float(_generator(v, t, r, h, ou) + s.mu * v_x + max(0.0, s.xi * (1.0 - v_x)))
