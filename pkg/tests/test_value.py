import math

import numpy as np
import pytest
from scipy import integrate

from oudividend.barrier import alpha
from oudividend.mc import PathConfig, rate_paths
from oudividend.ou_kernel import AssumptionViolation, OUParams, discount_mgf
from oudividend.quadrature import QuadratureConfig
from oudividend.value import (
    SurplusParams,
    gamma,
    gamma_pde_residual,
    hjb_residual,
    never_pay_value,
    tilde_G,
    value_function,
    value_max_payout,
)


def test_surplus_validation():
    with pytest.raises(ValueError):
        SurplusParams(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        SurplusParams(1.0, 0.5, 0.0)


def test_value_max_payout_examples(ou, horizon, surplus):
    assert value_max_payout(5.0, 0.3, 2.0, horizon, ou, surplus) == 2.0
    s0 = SurplusParams(1.0, 0.5, 1e-300)
    assert value_max_payout(1.0, 0.3, 2.0, horizon, ou, s0) == pytest.approx(float(discount_mgf(4.0, 0.3, ou)) * 6.0, rel=1e-12)
    # direct trapezoid of the time integral
    u = np.linspace(0, 5, 200_001)
    integral = integrate.trapezoid(discount_mgf(u, 0.0, ou), u)
    expected = integral + float(discount_mgf(5.0, 0.0, ou)) * (1.0 + 0.0 * 5)
    assert value_max_payout(0.0, 0.0, 1.0, horizon, ou, surplus) == pytest.approx(expected, rel=1e-9)


def test_assumption_enforced(horizon, surplus):
    bad = OUParams(1.0, 0.2, 1.0)
    for fn in (lambda: value_function(0, 0, 1, horizon, bad, surplus), lambda: gamma(0, 0, horizon, bad),
               lambda: value_max_payout(0, 0, 1, horizon, bad, surplus)):
        with pytest.raises(AssumptionViolation):
            fn()


def test_gamma_boundary_and_sign(ou, horizon):
    assert gamma(5.0, 0.0, horizon, ou) == 0.0
    for t in (0.0, 1.0, 4.0, 4.99):
        for r in (-3.0, -0.3, 0.0, 2.0):
            assert gamma(t, r, horizon, ou) >= 0.0


def test_gamma_vanishes_for_large_rates(ou, horizon):
    # the discount kills the integrand within time ~1/r, so r * gamma -> 1
    for r in (1e2, 1e4, 1e6):
        assert r * gamma(0.0, r, horizon, ou) == pytest.approx(1.0, abs=2.0 / r)
    assert tilde_G(0.0, 1e6, horizon, ou, SurplusParams(1, 0.5, 1)) < 2e-6


def test_gamma_monte_carlo_oracle(ou, horizon):
    # E int_0^T (e^{-U_0^s} - e^{-U_0^T}) 1[r_s > alpha(s)] ds on exact-step rate paths
    cfg = PathConfig(dt=2.5e-3, n_paths=100_000, seed=99)
    samples = []
    for t, r, u in rate_paths(0.0, 0.0, horizon, ou, cfg):
        d = np.exp(-u)
        f = (d - d[:, -1:]) * (r > alpha(t, horizon, ou))
        samples.append(cfg.dt * (f[:, :-1] + f[:, 1:]).sum(axis=1) / 2)
    y = np.concatenate(samples)
    g = gamma(0.0, 0.0, horizon, ou)
    assert abs(y.mean() - g) <= 3 * y.std(ddof=1) / math.sqrt(y.size)


def test_tilde_G_examples(ou, horizon, surplus):
    assert tilde_G(5.0, 0.4, horizon, ou, surplus) == 0.0
    s0 = SurplusParams(1.0, 0.5, 1e-300)
    assert tilde_G(2.0, 0.4, horizon, ou, s0) == pytest.approx(3.0 * float(discount_mgf(3.0, 0.4, ou)))


def test_tilde_G_increases_as_rate_decreases(ou, horizon, surplus):
    vals = [tilde_G(1.0, r, horizon, ou, surplus) for r in np.linspace(2, -3, 11)]
    assert np.all(np.diff(vals) > 0)


def test_value_function_terminal_and_linear(ou, horizon, surplus):
    assert value_function(5.0, -0.7, 3.3, horizon, ou, surplus).v == 3.3
    v1 = value_function(1.0, -0.2, 1.0, horizon, ou, surplus).v
    v2 = value_function(1.0, -0.2, 1.5, horizon, ou, surplus).v
    assert v2 - v1 == pytest.approx(0.5 * float(discount_mgf(4.0, -0.2, ou)), rel=1e-12)


def test_value_dominates_simple_strategies(ou, horizon, surplus):
    q = QuadratureConfig()
    for t in (0.0, 1.5, 3.0, 4.5):
        for r in (-2.0, -0.5, 0.0, 1.0):
            for x in (0.0, 1.0, 5.0):
                v = value_function(t, r, x, horizon, ou, surplus, q).v
                assert v >= value_max_payout(t, r, x, horizon, ou, surplus, q) - 1e-7
                assert v >= never_pay_value(t, r, x, horizon, ou, surplus) - 1e-7


@pytest.mark.parametrize("side", [+1, -1])
def test_gamma_pde_residual_away_from_barrier(ou, horizon, side):
    for t in (0.5, 1.5, 2.5, 3.5, 4.5):
        a_t = float(alpha(t, horizon, ou))
        for off in (0.6, 1.2, 2.0):
            assert abs(gamma_pde_residual(t, a_t + side * off, 1e-3, horizon, ou)) <= 1e-3


def test_gamma_pde_residual_with_tighter_quadrature(ou, horizon):
    loose = abs(gamma_pde_residual(2.0, 0.5, 1e-3, horizon, ou, QuadratureConfig(rel_tol=1e-5)))
    tight = abs(gamma_pde_residual(2.0, 0.5, 1e-3, horizon, ou, QuadratureConfig(rel_tol=1e-6)))
    assert tight <= max(loose, 1e-6)


def test_stencil_preconditions(ou, horizon):
    a_t = float(alpha(2.0, horizon, ou))
    with pytest.raises(ValueError):
        gamma_pde_residual(2.0, a_t + 0.005, 1e-3, horizon, ou)
    with pytest.raises(ValueError):
        gamma_pde_residual(0.0005, 0.5, 1e-3, horizon, ou)
    with pytest.raises(ValueError):
        gamma_pde_residual(2.0, 0.5, 0.0, horizon, ou)


def test_hjb_residual_grid(ou, horizon, surplus):
    for t in (0.5, 2.0, 3.5, 4.5):
        a_t = float(alpha(t, horizon, ou))
        for r in np.linspace(-2, 2, 9):
            if abs(r - a_t) <= 1e-2:
                continue
            for x in (0.0, 2.0):
                assert abs(hjb_residual(t, r, x, 1e-3, horizon, ou, surplus)) <= 1e-3


def test_hjb_residual_near_terminal_time(ou, horizon, surplus):
    t = horizon.T - 1e-3
    for r in (-1.0, 0.5):
        assert abs(hjb_residual(t, r, 1.0, 1e-4, horizon, ou, surplus)) <= 1e-2


def test_pay_side_flips_at_barrier(ou, horizon):
    t = 1.7
    a_t = float(alpha(t, horizon, ou))
    assert 1 - discount_mgf(horizon.T - t, a_t + 1e-6, ou) > 0
    assert 1 - discount_mgf(horizon.T - t, a_t - 1e-6, ou) < 0
