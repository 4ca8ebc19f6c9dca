"""Seeded Monte Carlo evaluation of payout strategies.

Paths are processed in fixed-size blocks.  Block ``k`` draws every random
number from its own Philox stream keyed by ``(seed, k)``, so results are
bit-identical for any number of worker threads: the reduction always runs in
block order.

The rate moves by exact Gaussian OU steps on the ``dt`` grid and the discount
exponent ``U`` is accumulated with the trapezoid rule on the same grid.  The
payout rate on ``[t_k, t_k + dt)`` is decided from the state at ``t_k``.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .barrier import Horizon, alpha
from .horizon import FirstPassageLaw, HealthyParams, StochasticBarrierTable, build_barrier_table
from .ou_kernel import (
    OUParams,
    discount_mgf,
    require_positive_tilde_b,
    sample_ou_with_integral,
    tilde_b,
)
from .quadrature import QuadratureConfig
from .value import SurplusParams

log = logging.getLogger(__name__)

BLOCK_SIZE = 512
_CHUNK_STEPS = 1000


class InadmissibleStrategy(ValueError):
    pass


@dataclass(frozen=True)
class PathConfig:
    """Simulation controls.

    ``t_max`` caps the stochastic horizon; ``None`` means ``50 / tilde_b``.
    ``workers`` only changes scheduling, never the numbers.
    """

    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 12345
    t_max: float | None = None
    checkpoints: tuple[float, ...] = ()
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class StrategySpec:
    """A payout policy.

    kind is one of ``always_max``, ``never``, ``barrier_deterministic``
    (optionally with the curve shifted by ``shift``), ``barrier_stochastic``,
    ``constant`` (``rate``) or ``tabulated`` (piecewise constant in time:
    ``rates[i]`` applies on ``[times[i], times[i+1])``).
    """

    kind: str
    rate: float | None = None
    shift: float = 0.0
    times: tuple[float, ...] = ()
    rates: tuple[float, ...] = ()
    name: str | None = None

    KINDS = ("always_max", "never", "barrier_deterministic", "barrier_stochastic", "constant", "tabulated")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "constant" and self.rate is None:
            raise ValueError("constant strategy needs a rate")
        if self.kind == "tabulated" and (len(self.times) == 0 or len(self.times) != len(self.rates)):
            raise ValueError("tabulated strategy needs equally long, non-empty times and rates")

    @classmethod
    def always_max(cls):
        return cls("always_max")

    @classmethod
    def never(cls):
        return cls("never")

    @classmethod
    def barrier_deterministic(cls, shift: float = 0.0):
        return cls("barrier_deterministic", shift=shift)

    @classmethod
    def barrier_stochastic(cls):
        return cls("barrier_stochastic")

    @classmethod
    def constant(cls, rate: float):
        return cls("constant", rate=rate)

    @classmethod
    def tabulated(cls, times, rates, name=None):
        return cls("tabulated", times=tuple(float(t) for t in times), rates=tuple(float(c) for c in rates), name=name)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "constant":
            return f"constant({self.rate:g})"
        if self.kind == "barrier_deterministic" and self.shift:
            return f"barrier_deterministic({self.shift:+g})"
        return self.kind

    def check_admissible(self, xi: float) -> None:
        if self.kind == "constant" and not 0 <= self.rate <= xi:
            raise InadmissibleStrategy(f"constant rate {self.rate} outside [0, {xi}]")
        if self.kind == "tabulated":
            rates = np.asarray(self.rates)
            if np.any(rates < 0) or np.any(rates > xi):
                raise InadmissibleStrategy(f"tabulated rates outside [0, {xi}]")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("tabulated times must be strictly increasing")


def random_tabulated(rng: np.random.Generator, t_end: float, xi: float, n_knots: int = 20, name=None) -> StrategySpec:
    """A random admissible time-table strategy."""
    times = np.linspace(0.0, t_end, n_knots, endpoint=False)
    return StrategySpec.tabulated(times, rng.uniform(0.0, xi, n_knots), name=name)


@dataclass
class EstimateResult:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    elapsed: float
    label: str = ""
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, seed, elapsed, label="", **diagnostics):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(samples.mean()), se, n, seed, elapsed, label, diagnostics)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "elapsed": self.elapsed,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class FixedHorizonProblem:
    ou: OUParams
    surplus: SurplusParams
    horizon: Horizon
    x0: float
    t0: float = 0.0

    @property
    def r0(self) -> float:
        return self.ou.r0


@dataclass(frozen=True)
class RandomHorizonProblem:
    """Stochastic-horizon setting; the reference level starts at ``z0 = x0 - l0``."""

    ou: OUParams
    surplus: SurplusParams
    healthy: HealthyParams
    x0: float

    def __post_init__(self):
        self.healthy.validate_against(self.surplus.mu)

    @property
    def r0(self) -> float:
        return self.ou.r0

    @property
    def l0(self) -> float:
        return self.x0 - self.healthy.z0

    @property
    def law(self) -> FirstPassageLaw:
        return FirstPassageLaw(self.surplus.mu - self.healthy.zeta, self.surplus.sigma, self.healthy.z0)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent counter-based stream for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int):
    return [(k, min(BLOCK_SIZE, n_paths - k * BLOCK_SIZE)) for k in range(math.ceil(n_paths / BLOCK_SIZE))]


def _run_blocks(fn, n_paths: int, workers: int):
    blocks = _blocks(n_paths)
    if workers == 1:
        return [fn(k, nb) for k, nb in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda kb: fn(*kb), blocks))


def ou_steps(r_start, gaussians, dt: float, ou: OUParams):
    """Exact OU paths on a uniform grid; returns shape ``(n, m + 1)``."""
    e = math.exp(-ou.a * dt)
    sd = math.sqrt(ou.delta**2 / (2 * ou.a) * -math.expm1(-2 * ou.a * dt))
    r_start = np.asarray(r_start, dtype=float)
    m = gaussians.shape[1]
    noise = lfilter([sd], [1.0, -e], gaussians, axis=1)
    out = np.empty((gaussians.shape[0], m + 1))
    out[:, 0] = r_start
    out[:, 1:] = ou.b + (r_start - ou.b)[:, None] * e ** np.arange(1, m + 1)[None, :] + noise
    return out


def trapezoid_exponent(u_start, r, dt: float):
    u = np.empty_like(r)
    u[:, 0] = u_start
    u[:, 1:] = np.asarray(u_start)[..., None] + np.cumsum(0.5 * dt * (r[:, :-1] + r[:, 1:]), axis=1)
    return u


def _grid(t0: float, T: float, dt: float):
    n = max(1, int(round((T - t0) / dt)))
    return n, (T - t0) / n


def rate_paths(t0: float, r0: float, horizon: Horizon, ou: OUParams, cfg: PathConfig):
    """Yield ``(t, r, U)`` blocks of rate paths on the ``dt`` grid over ``[t0, T]``.

    Uses exactly the draws :func:`simulate_value_deterministic` uses for the rate.
    """
    n, dt = _grid(t0, horizon.T, cfg.dt)
    t = t0 + dt * np.arange(n + 1)
    for k, nb in _blocks(cfg.n_paths):
        rng = block_rng(cfg.seed, k)
        g_b = rng.standard_normal((nb, n))
        r = ou_steps(np.full(nb, r0), g_b, dt, ou)
        yield t, r, trapezoid_exponent(np.zeros(nb), r, dt)


def _tabulated_rates(spec: StrategySpec, t):
    idx = np.searchsorted(np.asarray(spec.times), t, side="right") - 1
    rates = np.asarray(spec.rates)
    return np.where(idx >= 0, rates[np.clip(idx, 0, None)], 0.0)


def _rates(spec: StrategySpec, t, r, z, xi, curve=None, table: StochasticBarrierTable | None = None):
    """Payout rates for states ``r`` (paths x steps) at grid times ``t``."""
    if spec.kind == "always_max":
        c = np.full(r.shape, xi)
    elif spec.kind == "never":
        c = np.zeros(r.shape)
    elif spec.kind == "constant":
        c = np.full(r.shape, float(spec.rate))
    elif spec.kind == "tabulated":
        c = np.broadcast_to(_tabulated_rates(spec, t)[None, :], r.shape)
    elif spec.kind == "barrier_deterministic":
        if curve is None:
            raise ValueError("barrier_deterministic needs a fixed horizon")
        c = np.where(r > (curve + spec.shift)[None, :], xi, 0.0)
    elif spec.kind == "barrier_stochastic":
        if table is None:
            raise ValueError("barrier_stochastic needs the stochastic-horizon setting")
        c = np.where(table.pay(r, z), xi, 0.0)
    if np.any(c < 0) or np.any(c > xi):
        raise InadmissibleStrategy(f"{spec.label} emitted a rate outside [0, {xi}]")
    return c


# --------------------------------------------------------------------------- fixed horizon


@dataclass
class _PathTrace:
    t: np.ndarray
    r: np.ndarray
    x: np.ndarray
    c: np.ndarray
    u: np.ndarray


def _fixed_block(k, nb, problem: FixedHorizonProblem, strategies, cfg, n_trace):
    ou, s, T = problem.ou, problem.surplus, problem.horizon.T
    n, dt = _grid(problem.t0, T, cfg.dt)
    t = problem.t0 + dt * np.arange(n + 1)
    rng = block_rng(cfg.seed, k)
    g_b = rng.standard_normal((nb, n))
    g_w = rng.standard_normal((nb, n))
    r = ou_steps(np.full(nb, problem.r0), g_b, dt, ou)
    u = trapezoid_exponent(np.zeros(nb), r, dt)
    disc = np.exp(-u)
    mid_disc = 0.5 * (disc[:, :-1] + disc[:, 1:])
    curve = alpha(t[:-1], problem.horizon, ou)
    w_t = math.sqrt(dt) * g_w.sum(axis=1)
    payoffs = np.empty((len(strategies), nb))
    traces = []
    for i, spec in enumerate(strategies):
        c = _rates(spec, t[:-1], r[:, :-1], None, s.xi, curve=curve)
        paid = c.sum(axis=1) * dt
        x_T = problem.x0 + s.mu * (T - problem.t0) - paid + s.sigma * w_t
        payoffs[i] = dt * (c * mid_disc).sum(axis=1) + disc[:, -1] * x_T
        if n_trace and i == 0:
            m = min(n_trace, nb)
            cum_c = np.concatenate([np.zeros((m, 1)), np.cumsum(c[:m] * dt, axis=1)], axis=1)
            w = np.concatenate([np.zeros((m, 1)), np.cumsum(math.sqrt(dt) * g_w[:m], axis=1)], axis=1)
            x = problem.x0 + s.mu * (t - problem.t0)[None, :] - cum_c + s.sigma * w
            c_full = np.concatenate([c[:m], c[:m, -1:]], axis=1)
            traces = [_PathTrace(t, r[j], x[j], c_full[j], u[j]) for j in range(m)]
    return payoffs, traces


def _fixed_payoffs(problem: FixedHorizonProblem, strategies, cfg: PathConfig, n_trace=0):
    require_positive_tilde_b(problem.ou)
    for spec in strategies:
        spec.check_admissible(problem.surplus.xi)
        if spec.kind == "barrier_stochastic":
            raise ValueError("barrier_stochastic is defined for the stochastic horizon only")
    results = _run_blocks(lambda k, nb: _fixed_block(k, nb, problem, strategies, cfg, n_trace if k == 0 else 0), cfg.n_paths, cfg.workers)
    payoffs = np.concatenate([p for p, _ in results], axis=1)
    return payoffs, results[0][1]


def simulate_value_deterministic(problem: FixedHorizonProblem, strategy: StrategySpec, cfg: PathConfig, n_trace: int = 0):
    """Monte Carlo value of ``strategy`` over ``[t0, T]``.

    With ``n_trace > 0`` also returns the first ``n_trace`` path traces.
    """
    start = time.perf_counter()
    payoffs, traces = _fixed_payoffs(problem, [strategy], cfg, n_trace)
    res = EstimateResult.from_samples(payoffs[0], cfg.seed, time.perf_counter() - start, strategy.label,
                                      dt=_grid(problem.t0, problem.horizon.T, cfg.dt)[1])
    return (res, traces) if n_trace else res


# --------------------------------------------------------------------------- first passage


def refine_hits(x0, x1, h, sigma, rng: np.random.Generator):
    """Fraction of a step at which a Brownian bridge first reaches zero.

    The bridge runs from ``x0 > 0`` to ``x1`` over time ``h`` and is known to
    reach zero.  Reflecting the path after the hit maps this onto the bridge
    from ``x0`` to ``y = -|x1|`` with the same hitting time.  With
    ``t = h s / (h + s)`` that bridge becomes ``x0 + (y/h) s + sigma W_s``,
    whose hitting time ``s`` is inverse Gaussian, so the draw is exact.
    """
    x0 = np.asarray(x0, dtype=float)
    y = -np.maximum(np.abs(np.asarray(x1, dtype=float)), 1e-300)
    s = rng.wald(x0 * h / -y, (x0 / sigma) ** 2)
    return np.where(np.isfinite(s), s / (h + s), 1.0)


def simulate_first_passage(law: FirstPassageLaw, n_paths: int, dt: float, t_max: float, seed: int,
                           workers: int = 1):
    """Hitting times of zero for ``z + drift t + sigma W``, bridge corrected.

    A step from ``z_k`` to ``z_{k+1}`` (both positive) contains a crossing with
    probability ``exp(-2 z_k z_{k+1} / (sigma^2 dt))``; the crossing is then
    located by :func:`refine_hits`.  Paths alive at ``t_max`` return ``inf``.
    """

    def block(k, nb):
        rng = block_rng(seed, k)
        tau = np.full(nb, np.inf)
        z = np.full(nb, float(law.z))
        alive = np.arange(nb)
        t_now = 0.0
        n_total = int(math.ceil(t_max / dt - 1e-9))
        done = 0
        while alive.size and done < n_total:
            m = min(_CHUNK_STEPS, n_total - done)
            g = rng.standard_normal((alive.size, m))
            u = rng.random((alive.size, m))
            zp = z[alive][:, None] + np.cumsum(law.drift * dt + law.sigma * math.sqrt(dt) * g, axis=1)
            prev = np.concatenate([z[alive][:, None], zp[:, :-1]], axis=1)
            with np.errstate(over="ignore"):
                p = np.where(zp <= 0, 1.0, np.exp(-2 * prev * np.maximum(zp, 0) / (law.sigma**2 * dt)))
            hit = u < p
            any_hit = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            rows = np.flatnonzero(any_hit)
            if rows.size:
                ks = first[rows]
                frac = refine_hits(prev[rows, ks], zp[rows, ks], dt, law.sigma, rng)
                tau[alive[rows]] = t_now + (ks + frac) * dt
            z[alive] = zp[:, -1]
            alive = alive[~any_hit]
            t_now += m * dt
            done += m
        return tau

    results = _run_blocks(block, n_paths, workers)
    return np.concatenate(results)


# --------------------------------------------------------------------------- stochastic horizon


def default_t_max(ou: OUParams) -> float:
    return 50.0 / require_positive_tilde_b(ou)


def stochastic_barrier_table(problem: RandomHorizonProblem, q=QuadratureConfig(), n: int = 60) -> StochasticBarrierTable:
    ou = problem.ou
    stat_sd = ou.delta / math.sqrt(2 * ou.a)
    r_min = min(problem.r0, ou.b) - 6 * stat_sd
    return build_barrier_table(ou, problem.law, r_min, n, q)


def _random_block(k, nb, problem: RandomHorizonProblem, strategies, cfg, t_max, table, n_trace):
    ou, s = problem.ou, problem.surplus
    law = problem.law
    zeta, l0 = problem.healthy.zeta, problem.l0
    n_strat = len(strategies)
    n_total = int(math.ceil(t_max / cfg.dt - 1e-9))
    dt = t_max / n_total
    sqdt = math.sqrt(dt)
    rng = block_rng(cfg.seed, k)

    r = np.full(nb, float(problem.r0))
    u = np.zeros(nb)
    z = np.full(nb, float(law.z))
    div = np.zeros((n_strat, nb))
    paid = np.zeros((n_strat, nb))
    payoff = np.zeros((n_strat, nb))
    hit_time = np.full(nb, np.inf)
    gap = 0.0
    alive = np.arange(nb)
    done = 0
    traces = {j: [] for j in range(min(n_trace, nb))}

    while alive.size and done < n_total:
        m = min(_CHUNK_STEPS, n_total - done)
        na = alive.size
        g_b = rng.standard_normal((na, m))
        g_w = rng.standard_normal((na, m))
        uh = rng.random((na, m))
        t = (done + np.arange(m + 1)) * dt
        rp = ou_steps(r[alive], g_b, dt, ou)
        up = trapezoid_exponent(u[alive], rp, dt)
        zp = np.empty((na, m + 1))
        zp[:, 0] = z[alive]
        zp[:, 1:] = z[alive][:, None] + np.cumsum(law.drift * dt + law.sigma * sqdt * g_w, axis=1)
        with np.errstate(over="ignore"):
            p = np.where(zp[:, 1:] <= 0, 1.0, np.exp(-2 * zp[:, :-1] * np.maximum(zp[:, 1:], 0) / (law.sigma**2 * dt)))
        hit = uh < p
        any_hit = hit.any(axis=1)
        first = np.where(any_hit, np.argmax(hit, axis=1), m)
        live_step = np.arange(m)[None, :] < first[:, None]

        rows = np.flatnonzero(any_hit)
        ks = first[rows]
        frac = np.zeros(rows.size)
        if rows.size:
            frac = refine_hits(zp[rows, ks], zp[rows, ks + 1], dt, law.sigma, rng)
        r_tau = rp[rows, ks] + frac * (rp[rows, ks + 1] - rp[rows, ks])
        u_tau = up[rows, ks] + 0.5 * frac * dt * (rp[rows, ks] + r_tau)
        d_tau = np.exp(-u_tau)
        tau = t[ks] + frac * dt
        hit_time[alive[rows]] = tau

        disc = np.exp(-up)
        mid = 0.5 * (disc[:, :-1] + disc[:, 1:])
        paid_before = paid[0].copy()
        for i, spec in enumerate(strategies):
            c = _rates(spec, t[:-1], rp[:, :-1], zp[:, :-1], s.xi, table=table)
            cl = np.where(live_step, c, 0.0)
            div[i, alive] += dt * (cl * mid).sum(axis=1)
            paid[i, alive] += dt * cl.sum(axis=1)
            if rows.size:
                ck = c[rows, ks]
                div[i, alive[rows]] += frac * dt * ck * 0.5 * (disc[rows, ks] + d_tau)
                paid[i, alive[rows]] += frac * dt * ck
                # surplus at the horizon: x0 + mu tau + sigma W_tau - C_tau with z_tau = 0
                w_tau = -(law.z + law.drift * tau) / s.sigma
                x_tau = problem.x0 + s.mu * tau + s.sigma * w_tau - paid[i, alive[rows]]
                ledger = l0 + zeta * tau - paid[i, alive[rows]]
                gap = max(gap, float(np.max(np.abs(x_tau - ledger))))
                payoff[i, alive[rows]] = div[i, alive[rows]] + d_tau * ledger
            if i == 0 and traces:
                for j in traces:
                    pos = np.flatnonzero(alive == j)
                    if pos.size == 0:
                        continue
                    q_ = pos[0]
                    steps = int(first[q_])
                    cum = paid_before[j]
                    cc = np.concatenate([[cum], cum + np.cumsum(dt * cl[q_, :steps])])
                    w = (zp[q_, : steps + 1] - law.z - law.drift * t[: steps + 1]) / s.sigma
                    x = problem.x0 + s.mu * t[: steps + 1] + s.sigma * w - cc
                    traces[j].append((t[: steps + 1], rp[q_, : steps + 1], x, c[q_, : steps + 1] if steps < m else np.append(c[q_], c[q_, -1]), up[q_, : steps + 1]))

        keep = ~any_hit
        r[alive] = rp[:, -1]
        u[alive] = up[:, -1]
        z[alive] = zp[:, -1]
        alive = alive[keep]
        done += m

    # survivors: dividends so far; the tail beyond t_max is bounded, not added
    tb = tilde_b(ou)
    payoff[:, alive] = div[:, alive]
    log_c = np.maximum(tb - r[alive], 0.0) / ou.a
    bound = s.xi * np.exp(-u[alive] + log_c) / tb
    out_traces = []
    for j, segs in traces.items():
        if segs:
            # consecutive chunks share their boundary grid point
            out_traces.append(_PathTrace(*(np.concatenate([segs[0][i]] + [sg[i][1:] for sg in segs[1:]]) for i in range(5))))
    return payoff, hit_time, float(bound.sum()), gap, out_traces


def _random_payoffs(problem: RandomHorizonProblem, strategies, cfg: PathConfig, table=None, n_trace=0):
    require_positive_tilde_b(problem.ou)
    for spec in strategies:
        spec.check_admissible(problem.surplus.xi)
        if spec.kind == "barrier_deterministic":
            raise ValueError("barrier_deterministic needs a fixed horizon")
    t_max = cfg.t_max if cfg.t_max is not None else default_t_max(problem.ou)
    if table is None and any(sp.kind == "barrier_stochastic" for sp in strategies):
        table = stochastic_barrier_table(problem)
    results = _run_blocks(
        lambda k, nb: _random_block(k, nb, problem, strategies, cfg, t_max, table, n_trace if k == 0 else 0),
        cfg.n_paths, cfg.workers,
    )
    payoffs = np.concatenate([r[0] for r in results], axis=1)
    hits = np.concatenate([r[1] for r in results])
    diag = {
        "t_max": t_max,
        "survived_fraction": float(np.mean(~np.isfinite(hits))),
        "truncation_bound": sum(r[2] for r in results) / cfg.n_paths,
        "accounting_gap": max(r[3] for r in results),
    }
    return payoffs, hits, diag, results[0][4]


def simulate_value_stochastic(problem: RandomHorizonProblem, strategy: StrategySpec, cfg: PathConfig,
                              n_trace: int = 0, table: StochasticBarrierTable | None = None):
    """Monte Carlo value of ``strategy`` up to the first passage of the healthy surplus.

    ``diagnostics`` carries the survivor fraction at ``t_max``, the mean
    per-path bound on the dropped dividend tail, and the largest deviation of
    the accounting identity ``X_tau = l + int (zeta - c)``.
    """
    start = time.perf_counter()
    payoffs, _, diag, traces = _random_payoffs(problem, [strategy], cfg, table, n_trace)
    res = EstimateResult.from_samples(payoffs[0], cfg.seed, time.perf_counter() - start, strategy.label, **diag)
    return (res, traces) if n_trace else res


# --------------------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class CheckpointStat:
    s: float
    mean: float
    std_error: float
    target: float

    @property
    def z_score(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == self.target else math.inf
        return (self.mean - self.target) / self.std_error


def martingale_check(t0: float, r0: float, horizon: Horizon, ou: OUParams, cfg: PathConfig):
    """Sample means of ``Y_s = exp(-U_{t0}^s) M(T - s, r_s)`` at the checkpoints.

    ``Y`` is the conditional expectation of the terminal discount factor, so
    every checkpoint mean should match ``M(T - t0, r0)``.  Paths move between
    checkpoints with the exact joint sampler of ``(r, int r)``; there is no
    time-discretisation error.
    """
    T = horizon.T
    cps = cfg.checkpoints or tuple(t0 + f * (T - t0) for f in (0.25, 0.5, 0.75, 1.0))
    cps = tuple(sorted(set((t0,) + tuple(cps))))
    if cps[0] < t0 or cps[-1] > T:
        raise ValueError("checkpoints must lie in [t0, T]")
    target = float(discount_mgf(T - t0, r0, ou))

    def block(k, nb):
        rng = block_rng(cfg.seed, k)
        g = rng.standard_normal((len(cps) - 1, 2, nb))
        r = np.full(nb, float(r0))
        u = np.zeros(nb)
        ys = [np.full(nb, target)]
        for i in range(1, len(cps)):
            r, acc = sample_ou_with_integral(r, cps[i] - cps[i - 1], (g[i - 1, 0], g[i - 1, 1]), ou)
            u = u + acc.u_value
            ys.append(np.exp(-u) * discount_mgf(T - cps[i], r, ou))
        return np.array(ys)

    ys = np.concatenate(_run_blocks(block, cfg.n_paths, cfg.workers), axis=1)
    out = []
    for s, y in zip(cps, ys):
        if s > t0:
            out.append(CheckpointStat(float(s), float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size)), target))
        else:
            out.append(CheckpointStat(float(s), float(y[0]), 0.0, target))
    return out


@dataclass(frozen=True)
class DominanceRow:
    challenger: str
    base_mean: float
    challenger_mean: float
    difference: float
    std_error: float

    @property
    def passed(self) -> bool:
        return self.difference >= -3 * self.std_error


def dominance_suite(problem, base: StrategySpec, challengers, cfg: PathConfig, table=None):
    """Paired comparison of ``base`` against each challenger on common random numbers.

    A challenger passes when ``mean(base - challenger) >= -3 SE`` of the paired
    differences.
    """
    strategies = [base] + list(challengers)
    if isinstance(problem, FixedHorizonProblem):
        payoffs, _ = _fixed_payoffs(problem, strategies, cfg)
    else:
        payoffs, _, _, _ = _random_payoffs(problem, strategies, cfg, table)
    rows = []
    for i, spec in enumerate(challengers, start=1):
        d = payoffs[0] - payoffs[i]
        se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
        rows.append(DominanceRow(spec.label, float(payoffs[0].mean()), float(payoffs[i].mean()), float(d.mean()), se))
    return rows
