"""The acceptance suite: ten checks, each returning PASS, FAIL or SKIP with measured values.

Model parameters come from the run configuration where a check is about the
configured model (barrier identities, residuals, Monte Carlo agreement).  The
first-passage and horizon-discount checks run at fixed oracle points.  Checks
that need a positive ``tilde_b`` are skipped when the configuration violates it.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import config as config_mod
from .barrier import Horizon, alpha, barrier_curve
from .horizon import (
    FirstPassageLaw,
    HealthyParams,
    _tail_cap,
    first_passage_cdf,
    first_passage_density,
    first_passage_mass,
    horizon_discount,
    horizon_discount_series,
    survival_probability,
)
from .mc import (
    PathConfig,
    RandomHorizonProblem,
    StrategySpec,
    dominance_suite,
    martingale_check,
    random_tabulated,
    simulate_first_passage,
    simulate_value_deterministic,
)
from .ou_kernel import OUParams, discount_mgf, log_discount_mgf, mgf_pde_residual, tilde_b
from .quadrature import adaptive_gauss_legendre
from .value import SurplusParams, gamma_pde_residual, hjb_residual, value_function

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"


@dataclass
class CheckResult:
    number: int
    title: str
    status: str
    detail: str
    elapsed: float = 0.0
    budget: float | None = None

    @property
    def line(self) -> str:
        budget = f" (budget {self.budget:g}s)" if self.budget else ""
        return f"{self.status} [{self.number}] {self.title}: {self.detail} [{self.elapsed:.1f}s{budget}]"


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


# ----------------------------------------------------------------------------- 1, 2


def check_barrier_identities(cfg):
    ou, hz = cfg.ou(), cfg.horizon()
    t, a_t = barrier_curve(hz, ou, 500)
    worst = float(np.max(np.abs(log_discount_mgf(hz.T - t, a_t, ou))))
    at_T = abs(float(alpha(hz.T, hz, ou)))
    h = 1e-6
    slope = (float(alpha(hz.T, hz, ou)) - float(alpha(hz.T - h, hz, ou))) / h
    target = ou.b * ou.a / 2
    rel = abs(slope - target) / abs(target)
    ok = worst <= 1e-10 and at_T <= 1e-12 and rel <= 1e-4
    return _verdict(ok), f"max|ln M(T-t,alpha)|={worst:.2e} |alpha(T)|={at_T:.1e} alpha'(T)={slope:.6f} vs {target:.6f} (rel {rel:.1e})"


def _one_dip(values) -> bool:
    d = np.diff(values)
    k = int(np.argmin(values))
    return 0 < k < len(values) - 1 and np.all(d[:k] < 0) and np.all(d[k:] > 0)


def check_curve_shapes(cfg):
    hz = Horizon(5.0)
    _, up = barrier_curve(hz, OUParams(1.0, 0.51, 1.0), 500)
    _, dip = barrier_curve(hz, OUParams(1.0, 0.2, 1.0), 500)
    inc = bool(np.all(np.diff(up) > 0))
    nonmono = _one_dip(dip)
    t_min = 5.0 * int(np.argmin(dip)) / 499
    return _verdict(inc and nonmono), f"b=0.51 strictly increasing={inc}; b=0.2 decreasing then increasing={nonmono} (minimum near t={t_min:.2f})"


# ----------------------------------------------------------------------------- 3


def check_pde_residuals(cfg):
    ou, hz, s, q = cfg.ou(), cfg.horizon(), cfg.surplus(), cfg.quadrature()
    h = 1e-3
    worst_m = 0.0
    for u in np.linspace(0.1, hz.T, 25):
        for r in np.linspace(-2.0, 2.0, 21):
            res = abs(mgf_pde_residual(u, r, h, ou)) / max(1.0, float(discount_mgf(u, r, ou)))
            worst_m = max(worst_m, res)
    worst_g = worst_v = 0.0
    n_pts = 0
    for t in np.arange(0.25, hz.T - 0.2, 0.5):
        a_t = float(alpha(t, hz, ou))
        for r in np.linspace(-2.0, 2.0, 9):
            if abs(r - a_t) <= 10 * h:
                continue
            n_pts += 1
            worst_g = max(worst_g, abs(gamma_pde_residual(t, r, h, hz, ou, q)))
            worst_v = max(worst_v, abs(hjb_residual(t, r, cfg["surplus.x0"], h, hz, ou, s, q)))
    ok = worst_m <= 1e-4 and worst_g <= 1e-3 and worst_v <= 1e-3
    return _verdict(ok), f"mgf PDE max={worst_m:.2e}; gamma PDE max={worst_g:.2e}; HJB max={worst_v:.2e} over {n_pts} off-barrier points"


# ----------------------------------------------------------------------------- 4, 5, 6


def check_closed_form_vs_mc(cfg):
    problem = cfg.fixed_problem()
    pc = cfg.paths()
    closed = value_function(problem.t0, problem.r0, problem.x0, problem.horizon, problem.ou, problem.surplus, cfg.quadrature()).v
    est = simulate_value_deterministic(problem, StrategySpec.barrier_deterministic(), pc)
    z = (est.mean - closed) / est.std_error
    return _verdict(abs(z) <= 3), f"closed form {closed:.5f}, MC {est.mean:.5f} +- {est.std_error:.5f} ({est.n_paths} paths, dt={pc.dt:g}); z={z:+.2f}"


def dominance_challengers(horizon: Horizon, xi: float, seed: int):
    rng = np.random.default_rng(seed)
    out = [
        StrategySpec.always_max(),
        StrategySpec.never(),
        StrategySpec.barrier_deterministic(+0.1),
        StrategySpec.barrier_deterministic(-0.1),
    ]
    out += [random_tabulated(rng, horizon.T, xi, name=f"random_{i}") for i in range(5)]
    return out


def check_dominance(cfg):
    problem = cfg.fixed_problem()
    pc = cfg.paths()
    rows = dominance_suite(problem, StrategySpec.barrier_deterministic(), dominance_challengers(problem.horizon, problem.surplus.xi, pc.seed), pc)
    worst = min(rows, key=lambda r: r.difference / r.std_error if r.std_error else math.inf)
    ok = all(r.passed for r in rows)
    parts = ", ".join(f"{r.challenger} {r.difference:+.4f}({r.std_error:.4f})" for r in rows)
    return _verdict(ok), f"{sum(r.passed for r in rows)}/{len(rows)} beaten; worst {worst.challenger}; diffs(SE): {parts}"


def check_martingale(cfg):
    ou, hz = cfg.ou(), cfg.horizon()
    pc = cfg.paths()
    stats_ = martingale_check(0.0, ou.r0, hz, ou, pc)
    inner = [c for c in stats_ if c.s > 0]
    ok = all(abs(c.z_score) <= 3 for c in inner) and stats_[0].mean == stats_[0].target
    parts = ", ".join(f"s={c.s:g}: z={c.z_score:+.2f}" for c in inner)
    return _verdict(ok), f"target M(T,r0)={stats_[0].target:.6f}; {parts}"


# ----------------------------------------------------------------------------- 7, 8


FP_HITS = 100_000
FP_PATHS = 155_000
FP_DT = 1e-2
FP_TMAX = 200.0


def check_first_passage(cfg):
    worst = 0.0
    for m in (0.0, 0.2, 0.5):
        for z in (0.5, 1.0, 2.0):
            law = FirstPassageLaw(m, 1.0, z)
            worst = max(worst, abs(first_passage_mass(law, cfg.quadrature()) - (1 - survival_probability(law))))
    law = FirstPassageLaw(0.2, 1.0, 1.0)
    tau = simulate_first_passage(law, FP_PATHS, FP_DT, FP_TMAX, cfg["paths.seed"], cfg["paths.workers"])
    hits = tau[np.isfinite(tau)][:FP_HITS]
    if hits.size < FP_HITS:
        return FAIL, f"only {hits.size} hits, need {FP_HITS}"
    cap = float(first_passage_cdf(FP_TMAX, law))
    ks = stats.kstest(hits, lambda t: first_passage_cdf(t, law) / cap).statistic
    ok = worst <= 1e-8 and ks < 0.01
    return _verdict(ok), f"max |mass - (1 - P[tau=inf])|={worst:.1e}; KS={ks:.4f} on {hits.size} hits (dt={FP_DT:g})"


@dataclass(frozen=True)
class HorizonPoint:
    ou: OUParams
    law: FirstPassageLaw
    r: float


def horizon_points():
    narrow = OUParams(1.0, 0.51, 0.5)
    wide = OUParams(1.0, 0.51, 1.0)
    return [
        HorizonPoint(narrow, FirstPassageLaw(0.3, 1.0, 2.0), -0.2),
        HorizonPoint(narrow, FirstPassageLaw(0.3, 1.0, 2.0), 0.5),
        HorizonPoint(narrow, FirstPassageLaw(0.3, 1.0, 1.0), -1.0),
        HorizonPoint(narrow, FirstPassageLaw(0.5, 1.0, 0.5), 0.0),
        HorizonPoint(wide, FirstPassageLaw(0.2, 1.0, 1.0), -1.0),
        HorizonPoint(wide, FirstPassageLaw(0.2, 1.0, 1.0), 0.3),
    ]


HD_PATHS = 100_000
HD_DT = 5e-2
HD_TMAX = 100.0


def mc_horizon_discount(p: HorizonPoint, n_paths, seed, q, workers=1):
    """MC of ``E[M(tau, r); tau <= t_cap]`` plus the exact contribution of ``tau > t_cap``."""
    tau = simulate_first_passage(p.law, n_paths, HD_DT, HD_TMAX, seed, workers)
    vals = np.where(np.isfinite(tau), discount_mgf(np.where(np.isfinite(tau), tau, 0.0), p.r, p.ou), 0.0)
    tail = 0.0
    t_end = max(HD_TMAX, _tail_cap(p.r, p.ou, q.abs_tol))
    if t_end > HD_TMAX:
        tail = adaptive_gauss_legendre(lambda t: discount_mgf(t, p.r, p.ou) * first_passage_density(t, p.law),
                                       HD_TMAX, t_end, q.rel_tol, q.abs_tol, q.max_subdivisions,
                                       breakpoints=np.geomspace(HD_TMAX, t_end, 12)).value
    return float(vals.mean() + tail), float(vals.std(ddof=1) / math.sqrt(n_paths)), tail


def check_horizon_discount(cfg):
    q = cfg.quadrature()
    worst_series = 0.0
    n_series = 0
    worst_z = 0.0
    parts = []
    for i, p in enumerate(horizon_points()):
        quad = horizon_discount(p.r, p.law.z, p.ou, p.law, q)
        ser = horizon_discount_series(p.r, p.law.z, p.law, p.ou)
        if not ser.diverged:
            n_series += 1
            worst_series = max(worst_series, abs(ser.value - quad))
        mc, se, _ = mc_horizon_discount(p, HD_PATHS, cfg["paths.seed"] + i, q, cfg["paths.workers"])
        zsc = (mc - quad) / se
        worst_z = max(worst_z, abs(zsc))
        parts.append(f"r={p.r:+g},z={p.law.z:g}: {quad:.6f} z={zsc:+.2f}{'' if not ser.diverged else ' (series diverged)'}")
    near_zero = 0.0
    below_one = True
    for p in horizon_points():
        for r in (-2.0, -1.0, 0.0, 0.5, 2.0):
            near_zero = max(near_zero, abs(horizon_discount(r, 1e-9, p.ou, p.law, q) - 1.0))
        for r in (0.0, 0.3, 1.0, 3.0):
            for z in (0.01, 0.1, 0.5, 1.0, 3.0, 10.0):
                below_one &= horizon_discount(r, z, p.ou, p.law, q) < 1.0
    ok = n_series > 0 and worst_series <= 1e-6 and worst_z <= 3 and near_zero <= 1e-6 and below_one
    return _verdict(ok), (f"series-quadrature max={worst_series:.1e} at {n_series}/6 convergent points; MC max |z|={worst_z:.2f}; "
                          f"|phi(r,0+)-1| max={near_zero:.1e}; phi<1 for r>=0: {below_one}; " + "; ".join(parts))


# ----------------------------------------------------------------------------- 9, 10

STOCH_DT = 1e-2
STOCH_TMAX = 50.0


def stochastic_problem(cfg) -> RandomHorizonProblem:
    ou = replace(cfg.ou(), r0=-1.0)
    return RandomHorizonProblem(ou, SurplusParams(1.0, 1.0, 1.0), HealthyParams(0.5, 1.0), 1.0)


def check_stochastic_dominance(cfg):
    problem = stochastic_problem(cfg)
    pc = PathConfig(STOCH_DT, cfg["paths.n_paths"], cfg["paths.seed"], STOCH_TMAX, (), cfg["paths.workers"])
    challengers = [StrategySpec.constant(problem.healthy.zeta), StrategySpec.always_max(), StrategySpec.never()]
    rows = dominance_suite(problem, StrategySpec.barrier_stochastic(), challengers, pc)
    ok = all(r.passed for r in rows)
    parts = ", ".join(f"{r.challenger} {r.difference:+.4f}({r.std_error:.4f})" for r in rows)
    return _verdict(ok), f"{sum(r.passed for r in rows)}/{len(rows)} beaten at dt={STOCH_DT:g}, t_max={STOCH_TMAX:g}; diffs(SE): {parts}"


def check_determinism(cfg, n_workers: int = 4):
    from .cli import cmd_simulate

    small = cfg.with_overrides({"paths.n_paths": "2000", "paths.dt": "0.01", "paths.t_max": "20"})
    digests = {}
    with tempfile.TemporaryDirectory() as tmp:
        for setting, strategy in (("deterministic", "barrier_deterministic"), ("stochastic", "barrier_stochastic")):
            outs = []
            for run, workers in enumerate((1, 1, n_workers)):
                run_cfg = small.with_overrides({"paths.workers": str(workers), "output.dir": str(Path(tmp) / f"{setting}{run}")})
                files = cmd_simulate(run_cfg, strategy, setting, n_trace=3)
                outs.append({p.name: p.read_bytes() for p in files if p.suffix == ".csv"})
            digests[setting] = all(o == outs[0] for o in outs[1:]) and len(outs[0]) >= 2
    ok = all(digests.values())
    return _verdict(ok), "byte-identical CSVs across repeats and 1 vs %d workers: %s" % (n_workers, digests)


# -----------------------------------------------------------------------------


CRITERIA = [
    (1, "barrier identities", check_barrier_identities, False, 1.0),
    (2, "barrier curve shapes", check_curve_shapes, False, 1.0),
    (3, "PDE residuals", check_pde_residuals, True, 120.0),
    (4, "closed form vs MC", check_closed_form_vs_mc, True, 300.0),
    (5, "fixed-horizon dominance", check_dominance, True, 600.0),
    (6, "BSDE martingale", check_martingale, False, 120.0),
    (7, "first-passage law", check_first_passage, False, 180.0),
    (8, "horizon discount agreement", check_horizon_discount, False, 180.0),
    (9, "stochastic-horizon dominance", check_stochastic_dominance, True, 600.0),
    (10, "determinism", check_determinism, True, 60.0),
]


def run_check(number: int, cfg=None) -> CheckResult:
    cfg = cfg or config_mod.RunConfig()
    _, title, fn, needs_b, budget = CRITERIA[number - 1]
    if needs_b and tilde_b(cfg.ou()) <= 0:
        return CheckResult(number, title, SKIP, f"tilde_b = {tilde_b(cfg.ou()):g} <= 0 violates the standing assumption", 0.0, budget)
    start = time.perf_counter()
    status, detail = fn(cfg)
    elapsed = time.perf_counter() - start
    if status == PASS and elapsed > budget:
        status, detail = FAIL, f"{detail}; over runtime budget"
    return CheckResult(number, title, status, detail, elapsed, budget)


def run_all(cfg=None, numbers=None, echo=None):
    results = []
    for number, *_ in CRITERIA:
        if numbers and number not in numbers:
            continue
        res = run_check(number, cfg)
        if echo:
            echo(res.line)
        results.append(res)
    return results
