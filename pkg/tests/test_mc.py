import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oudividend.barrier import Decision, alpha, classify
from oudividend.horizon import HealthyParams, first_passage_cdf
from oudividend.mc import (
    EstimateResult,
    FixedHorizonProblem,
    InadmissibleStrategy,
    PathConfig,
    RandomHorizonProblem,
    StrategySpec,
    _rates,
    block_rng,
    dominance_suite,
    martingale_check,
    ou_steps,
    random_tabulated,
    refine_hits,
    simulate_value_deterministic,
    simulate_value_stochastic,
    stochastic_barrier_table,
)
from oudividend.ou_kernel import OUParams, discount_mgf, transition_moments
from oudividend.value import SurplusParams, never_pay_value, value_max_payout


@pytest.fixture
def problem(ou, horizon, surplus):
    return FixedHorizonProblem(ou, surplus, horizon, 1.0)


def within(est, target, k=3.0):
    return abs(est.mean - target) <= k * est.std_error


def test_path_config_validation():
    for kw in (dict(dt=0), dict(n_paths=0), dict(t_max=-1.0), dict(seed=-1), dict(workers=0)):
        with pytest.raises(ValueError):
            PathConfig(**kw)


def test_estimate_result_standard_error():
    x = np.arange(10.0)
    res = EstimateResult.from_samples(x, 1, 0.0)
    assert res.std_error == pytest.approx(x.std(ddof=1) / math.sqrt(10))


def test_block_streams_are_distinct_and_repeatable():
    a = block_rng(7, 0).standard_normal(4)
    assert np.array_equal(a, block_rng(7, 0).standard_normal(4))
    assert not np.array_equal(a, block_rng(7, 1).standard_normal(4))
    assert not np.array_equal(a, block_rng(8, 0).standard_normal(4))


def test_ou_steps_are_exact_transitions(ou):
    rng = np.random.default_rng(0)
    n = 200_000
    r = ou_steps(np.full(n, 0.3), rng.standard_normal((n, 4)), 0.25, ou)
    mean, var = transition_moments(1.0, 0.3, ou)
    assert r[:, -1].mean() == pytest.approx(mean, abs=4 * math.sqrt(var / n))
    assert r[:, -1].var() == pytest.approx(var, rel=0.02)


def test_never_matches_closed_form(problem):
    est = simulate_value_deterministic(problem, StrategySpec.never(), PathConfig(dt=5e-3, n_paths=40_000, seed=2))
    assert within(est, never_pay_value(0.0, 0.0, 1.0, problem.horizon, problem.ou, problem.surplus))


def test_always_max_matches_closed_form(problem):
    est = simulate_value_deterministic(problem, StrategySpec.always_max(), PathConfig(dt=5e-3, n_paths=40_000, seed=3))
    assert within(est, value_max_payout(0.0, 0.0, 1.0, problem.horizon, problem.ou, problem.surplus))


def test_discretisation_error_does_not_grow(ou, horizon, surplus):
    # a rate far from zero makes the trapezoid bias visible at coarse steps
    p = FixedHorizonProblem(OUParams(1.0, 0.51, 1.0, r0=2.0), surplus, horizon, 1.0)
    exact = value_max_payout(0.0, 2.0, 1.0, horizon, p.ou, surplus)
    coarse = simulate_value_deterministic(p, StrategySpec.always_max(), PathConfig(dt=0.2, n_paths=40_000, seed=4))
    fine = simulate_value_deterministic(p, StrategySpec.always_max(), PathConfig(dt=0.1, n_paths=40_000, seed=4))
    assert abs(fine.mean - exact) <= abs(coarse.mean - exact) + 2 * fine.std_error


def test_results_independent_of_worker_count(problem):
    cfgs = [PathConfig(dt=1e-2, n_paths=3000, seed=9, workers=w) for w in (1, 3)]
    a, b = (simulate_value_deterministic(problem, StrategySpec.barrier_deterministic(), c) for c in cfgs)
    assert a.mean == b.mean and a.std_error == b.std_error


def test_base_against_itself_is_exactly_zero(problem):
    rows = dominance_suite(problem, StrategySpec.barrier_deterministic(), [StrategySpec.barrier_deterministic()],
                           PathConfig(dt=1e-2, n_paths=2000, seed=1))
    assert rows[0].difference == 0.0 and rows[0].passed


def test_dominance_over_shifted_and_random_strategies(problem):
    rng = np.random.default_rng(5)
    challengers = [StrategySpec.barrier_deterministic(0.1), StrategySpec.barrier_deterministic(-0.1),
                   random_tabulated(rng, 5.0, 1.0, name="random")]
    rows = dominance_suite(problem, StrategySpec.barrier_deterministic(), challengers, PathConfig(dt=5e-3, n_paths=20_000, seed=6))
    assert all(r.passed for r in rows)


def test_inadmissible_rate_rejected_before_simulation(problem):
    cfg = PathConfig(dt=1e-3, n_paths=10**9)  # would never finish if paths ran
    with pytest.raises(InadmissibleStrategy):
        simulate_value_deterministic(problem, StrategySpec.constant(1.5), cfg)
    with pytest.raises(InadmissibleStrategy):
        simulate_value_deterministic(problem, StrategySpec.tabulated([0, 1], [0.5, -0.1]), cfg)


@given(st.floats(-5, 5))
def test_constant_admissibility(rate):
    spec = StrategySpec.constant(rate)
    if 0 <= rate <= 1.0:
        spec.check_admissible(1.0)
    else:
        with pytest.raises(InadmissibleStrategy):
            spec.check_admissible(1.0)


def test_unknown_strategy_and_setting_mismatch(problem):
    with pytest.raises(ValueError):
        StrategySpec("sometimes")
    with pytest.raises(ValueError):
        simulate_value_deterministic(problem, StrategySpec.barrier_stochastic(), PathConfig(n_paths=1))


def test_barrier_decisions_match_classify(ou, horizon):
    t = np.linspace(0, horizon.T, 51)[:-1]
    r = np.random.default_rng(3).normal(-0.2, 0.5, (20, 50))
    c = _rates(StrategySpec.barrier_deterministic(), t, r, None, 1.0, curve=alpha(t, horizon, ou))
    expected = np.array([[classify(ti, ri, horizon, ou) is Decision.PAY for ti, ri in zip(t, row)] for row in r])
    assert np.array_equal(c == 1.0, expected)


def test_martingale_checkpoints(ou, horizon):
    stats = martingale_check(0.0, 0.0, horizon, ou, PathConfig(n_paths=50_000, seed=8))
    assert stats[0].s == 0.0 and stats[0].mean == stats[0].target and stats[0].std_error == 0.0
    assert [c.s for c in stats[1:]] == [1.25, 2.5, 3.75, 5.0]
    assert stats[0].target == pytest.approx(float(discount_mgf(5.0, 0.0, ou)))
    assert all(abs(c.z_score) <= 3 for c in stats[1:])


def test_martingale_under_negative_tilde_b(horizon):
    p = OUParams(1.0, 0.2, 1.0)
    stats = martingale_check(0.0, 0.1, horizon, p, PathConfig(n_paths=50_000, seed=9))
    assert all(abs(c.z_score) <= 3 for c in stats[1:])


def test_refine_hits_matches_bridge_law():
    # the crossing time of a bridge from 1 to 1 over unit time, sigma 1:
    # P[hit before s | hit] is available from the joint law; compare its median with a fine simulation
    rng = np.random.default_rng(1)
    frac = refine_hits(np.full(200_000, 0.3), np.full(200_000, 0.4), 1.0, 1.0, rng)
    assert np.all((frac > 0) & (frac < 1))
    n, m = 20_000, 2000
    g = np.random.default_rng(2).standard_normal((n, m)) * math.sqrt(1 / m)
    w = np.cumsum(g, axis=1)
    s = np.arange(1, m + 1) / m
    bridge = 0.3 + w - s * w[:, -1:] + 0.1 * s
    hit = (bridge <= 0).any(axis=1)
    first = np.argmax(bridge[hit] <= 0, axis=1) / m
    # grid detection is late by O(sqrt(1/m)); allow for it
    assert np.median(frac) == pytest.approx(np.median(first), abs=0.02)


@pytest.fixture
def random_problem(ou):
    return RandomHorizonProblem(OUParams(1.0, 0.51, 1.0, r0=-1.0), SurplusParams(1.0, 1.0, 1.0), HealthyParams(0.5, 1.0), 1.0)


def test_stochastic_precondition(ou):
    with pytest.raises(ValueError):
        RandomHorizonProblem(ou, SurplusParams(1.0, 1.0, 1.0), HealthyParams(1.5, 1.0), 1.0)


@pytest.mark.parametrize("sigma", [1.0, 8.0])
def test_zero_drift_survival_matches_exact_tail(sigma):
    # recurrent case: every path hits eventually, but P[tau > t] decays only like t^{-1/2}
    p = RandomHorizonProblem(OUParams(1.0, 0.51, 1.0), SurplusParams(1.0, sigma, 1.0), HealthyParams(1.0, 1.0), 1.0)
    est = simulate_value_stochastic(p, StrategySpec.never(), PathConfig(dt=0.05, n_paths=4000, seed=3, t_max=200.0))
    tail = 1 - float(first_passage_cdf(200.0, p.law))
    assert est.diagnostics["survived_fraction"] == pytest.approx(tail, abs=4 * math.sqrt(tail * (1 - tail) / 4000))
    if sigma == 8.0:
        assert est.diagnostics["survived_fraction"] < 0.01


def test_accounting_identity(random_problem):
    est = simulate_value_stochastic(random_problem, StrategySpec.constant(0.3), PathConfig(dt=0.01, n_paths=2000, seed=4, t_max=20.0))
    assert est.diagnostics["accounting_gap"] < 1e-9


def test_stochastic_dominance_small(random_problem):
    table = stochastic_barrier_table(random_problem)
    rows = dominance_suite(random_problem, StrategySpec.barrier_stochastic(),
                           [StrategySpec.constant(0.5), StrategySpec.always_max(), StrategySpec.never()],
                           PathConfig(dt=0.02, n_paths=4000, seed=5, t_max=30.0), table=table)
    assert all(r.passed for r in rows)


def test_stochastic_barrier_pays_for_nonnegative_rates(random_problem):
    table = stochastic_barrier_table(random_problem)
    r = np.linspace(0, 3, 30)
    assert np.all(table.pay(r, np.full(30, 1e-6)))
    p = RandomHorizonProblem(OUParams(1.0, 0.51, 0.3, r0=1.0), SurplusParams(1.0, 1.0, 1.0), HealthyParams(0.5, 1.0), 1.0)
    cfg = PathConfig(dt=0.01, n_paths=1000, seed=6, t_max=0.5)
    a = simulate_value_stochastic(p, StrategySpec.always_max(), cfg)
    b = simulate_value_stochastic(p, StrategySpec.barrier_stochastic(), cfg)
    assert a.mean == b.mean


def test_stochastic_worker_invariance(random_problem):
    table = stochastic_barrier_table(random_problem)
    runs = [simulate_value_stochastic(random_problem, StrategySpec.barrier_stochastic(),
                                      PathConfig(dt=0.02, n_paths=1500, seed=2, t_max=10.0, workers=w), table=table)
            for w in (1, 4)]
    assert runs[0].mean == runs[1].mean
