"""Command-line entry point.  Every command writes CSV files plus ``manifest.json``.

CSV schemas (column order is fixed):

* ``barrier_curve.csv``: t, alpha
* ``value_surface.csv``: t, r, x, v, hjb_residual, status
* ``mgf_residual.csv``: u, r, residual
* ``gamma_residual.csv`` / ``hjb_residual.csv``: t, r, residual
* ``report.csv``: setting, strategy, mean, std_error, n_paths, seed, dt, t_max,
  survived_fraction, truncation_bound, accounting_gap
* ``paths.csv``: path, t, r, X, c, U
* ``phi_surface.csv``: r, z, phi
* ``barrier_level.csv``: r, z_star, status
* ``first_passage_density.csv``: t, density
* ``verify.csv``: criterion, title, status, detail

Timings live only in the manifest so the CSVs of repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, acceptance
from . import config as config_mod
from .barrier import alpha, barrier_curve
from .horizon import barrier_level, first_passage_density, horizon_discount
from .mc import (
    StrategySpec,
    default_t_max,
    simulate_value_deterministic,
    simulate_value_stochastic,
)
from .ou_kernel import AssumptionViolation, mgf_pde_residual, require_positive_tilde_b
from .quadrature import QuadratureError
from .value import gamma_pde_residual, hjb_residual, value_function

log = logging.getLogger("oudividend")


def _write_csv(path: Path, header, rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _fmt(x) -> str:
    return repr(float(x))


def write_manifest(cfg, command: str, files, elapsed: float, extra=None) -> Path:
    out = cfg.output_dir
    manifest = {
        "command": command,
        "config": dict(line.split(" = ", 1) for line in config_mod.dump(cfg).splitlines()),
        "seed": cfg["paths.seed"],
        "versions": {
            "oudividend": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "elapsed_seconds": round(elapsed, 3),
        "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files},
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n")
    (out / "config.txt").write_text(config_mod.dump(cfg))
    return path


# ----------------------------------------------------------------------------- commands


def cmd_barrier_curve(cfg, n_points: int = 501):
    if n_points < 500:
        raise ValueError("barrier curve needs at least 500 points")
    t, a_t = barrier_curve(cfg.horizon(), cfg.ou(), n_points)
    return [_write_csv(cfg.output_dir / "barrier_curve.csv", ["t", "alpha"], ((_fmt(ti), _fmt(ai)) for ti, ai in zip(t, a_t)))]


def _stencil_status(t, r, h, cfg):
    T = cfg["horizon.T"]
    if not h < t < T - h:
        return "boundary"
    if abs(r - float(alpha(t, cfg.horizon(), cfg.ou()))) <= 10 * h:
        return "near_barrier"
    return "ok"


def cmd_value_surface(cfg, t_values, r_values, x_values, h: float = 1e-3):
    ou, hz, s, q = cfg.ou(), cfg.horizon(), cfg.surplus(), cfg.quadrature()
    require_positive_tilde_b(ou)
    rows = []
    for t in t_values:
        for r in r_values:
            for x in x_values:
                status = _stencil_status(t, r, h, cfg)
                try:
                    v = value_function(t, r, x, hz, ou, s, q).v
                    res = hjb_residual(t, r, x, h, hz, ou, s, q) if status == "ok" else math.nan
                except QuadratureError as exc:
                    log.warning("quadrature failed at t=%g r=%g: %s", t, r, exc)
                    v, res, status = exc.estimate, math.nan, "quadrature_error"
                rows.append((_fmt(t), _fmt(r), _fmt(x), _fmt(v), _fmt(res), status))
    return [_write_csv(cfg.output_dir / "value_surface.csv", ["t", "r", "x", "v", "hjb_residual", "status"], rows)]


def cmd_hjb_check(cfg, t_values, r_values, h: float = 1e-3):
    ou, hz, s, q = cfg.ou(), cfg.horizon(), cfg.surplus(), cfg.quadrature()
    require_positive_tilde_b(ou)
    x = cfg["surplus.x0"]
    mgf_rows, g_rows, v_rows = [], [], []
    for u in t_values:
        for r in r_values:
            if u > h:
                mgf_rows.append((_fmt(u), _fmt(r), _fmt(mgf_pde_residual(u, r, h, ou))))
    for t in t_values:
        for r in r_values:
            if _stencil_status(t, r, h, cfg) != "ok":
                continue
            g_rows.append((_fmt(t), _fmt(r), _fmt(gamma_pde_residual(t, r, h, hz, ou, q))))
            v_rows.append((_fmt(t), _fmt(r), _fmt(hjb_residual(t, r, x, h, hz, ou, s, q))))
    out = cfg.output_dir
    return [
        _write_csv(out / "mgf_residual.csv", ["u", "r", "residual"], mgf_rows),
        _write_csv(out / "gamma_residual.csv", ["t", "r", "residual"], g_rows),
        _write_csv(out / "hjb_residual.csv", ["t", "r", "residual"], v_rows),
    ]


def parse_strategy(text: str) -> StrategySpec:
    name, _, arg = text.partition(":")
    if name == "constant":
        return StrategySpec.constant(float(arg))
    if name == "barrier_deterministic" and arg:
        return StrategySpec.barrier_deterministic(float(arg))
    if arg:
        raise ValueError(f"strategy {name!r} takes no argument")
    return StrategySpec(name)


REPORT_COLUMNS = ["setting", "strategy", "mean", "std_error", "n_paths", "seed", "dt", "t_max",
                  "survived_fraction", "truncation_bound", "accounting_gap"]


def cmd_simulate(cfg, strategy: str, setting: str = "deterministic", n_trace: int = 0):
    spec = parse_strategy(strategy)
    pc = cfg.paths()
    out = cfg.output_dir
    if setting == "deterministic":
        res = simulate_value_deterministic(cfg.fixed_problem(), spec, pc, n_trace)
    elif setting == "stochastic":
        problem = cfg.random_problem()
        t_max = pc.t_max if pc.t_max is not None else default_t_max(problem.ou)
        if t_max / pc.dt > 1e6:
            log.warning("stochastic run with %.3g steps per path (t_max=%g, dt=%g)", t_max / pc.dt, t_max, pc.dt)
        res = simulate_value_stochastic(problem, spec, pc, n_trace)
    else:
        raise ValueError(f"unknown setting {setting!r}")
    res, traces = res if n_trace else (res, [])
    d = res.diagnostics
    row = [setting, res.label, _fmt(res.mean), _fmt(res.std_error), res.n_paths, res.seed,
           _fmt(d.get("dt", pc.dt)), _fmt(d.get("t_max", cfg["horizon.T"])),
           _fmt(d.get("survived_fraction", math.nan)), _fmt(d.get("truncation_bound", math.nan)),
           _fmt(d.get("accounting_gap", math.nan))]
    files = [_write_csv(out / "report.csv", REPORT_COLUMNS, [row])]
    if traces:
        rows = []
        for j, tr in enumerate(traces):
            rows.extend((j, _fmt(t), _fmt(r), _fmt(x), _fmt(c), _fmt(u)) for t, r, x, c, u in zip(tr.t, tr.r, tr.x, tr.c, tr.u))
        files.append(_write_csv(out / "paths.csv", ["path", "t", "r", "X", "c", "U"], rows))
    write_manifest(cfg, f"simulate {setting} {strategy}", files, res.elapsed, {"estimate": res.to_dict()})
    return files


def cmd_stochastic_barrier(cfg, r_values, z_values, t_values):
    ou = cfg.ou()
    require_positive_tilde_b(ou)
    q = cfg.quadrature()
    law = cfg.random_problem().law
    phi_rows = [(_fmt(r), _fmt(z), _fmt(horizon_discount(r, z, ou, law.at(z), q))) for r in r_values for z in z_values]
    lvl_rows = []
    for r in r_values:
        lvl = barrier_level(r, law, ou, q)
        lvl_rows.append((_fmt(r), _fmt(lvl.z if lvl.z is not None else math.nan), lvl.status))
    dens = first_passage_density(np.asarray(t_values, float), law)
    out = cfg.output_dir
    return [
        _write_csv(out / "phi_surface.csv", ["r", "z", "phi"], phi_rows),
        _write_csv(out / "barrier_level.csv", ["r", "z_star", "status"], lvl_rows),
        _write_csv(out / "first_passage_density.csv", ["t", "density"], ((_fmt(t), _fmt(f)) for t, f in zip(t_values, dens))),
    ]


def cmd_verify(cfg, numbers=None, echo=print) -> tuple[int, list]:
    results = acceptance.run_all(cfg, numbers, echo)
    n_fail = sum(r.status == acceptance.FAIL for r in results)
    echo(f"{len(results) - n_fail}/{len(results)} not failing ({sum(r.status == acceptance.SKIP for r in results)} skipped)")
    rows = [(r.number, r.title, r.status, r.detail) for r in results]
    files = [_write_csv(cfg.output_dir / "verify.csv", ["criterion", "title", "status", "detail"], rows)]
    return (1 if n_fail else 0), files


# ----------------------------------------------------------------------------- argument parsing


def _floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _linspace(text: str):
    """``lo:hi:n`` or a comma list."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(n)))
    return _floats(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file with 'key = value' lines")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--seed", type=int, help="shortcut for --set paths.seed=N")
    common.add_argument("--out", help="output directory (shortcut for --set output.dir=DIR)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="oudividend", description=__doc__.split("\n", 1)[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("barrier-curve", parents=[common], help="alpha(t) on [0, T]")
    s.add_argument("--points", type=int, default=501)

    s = sub.add_parser("value-surface", parents=[common], help="value function with HJB residuals")
    s.add_argument("--t", default="0:4.5:10", help="lo:hi:n or comma list")
    s.add_argument("--r", default="-2:2:9")
    s.add_argument("--x", default="0,1,2")
    s.add_argument("--h", type=float, default=1e-3)

    s = sub.add_parser("hjb-check", parents=[common], help="PDE residual maps")
    s.add_argument("--t", default="0.25:4.75:10")
    s.add_argument("--r", default="-2:2:9")
    s.add_argument("--h", type=float, default=1e-3)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo value of a strategy")
    s.add_argument("--strategy", default="barrier_deterministic",
                   help="always_max | never | barrier_deterministic[:shift] | barrier_stochastic | constant:RATE")
    s.add_argument("--setting", choices=["deterministic", "stochastic"], default="deterministic")
    s.add_argument("--trace", type=int, default=0, help="dump this many paths to paths.csv")

    s = sub.add_parser("stochastic-barrier", parents=[common], help="phi surface, z*(r) and first-passage density")
    s.add_argument("--r", default="-3:1:17")
    s.add_argument("--z", default="0.05:4:40")
    s.add_argument("--t", default="0.01:20:400")

    s = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", default="", help="comma list of criterion numbers")
    return p


def load_config(args):
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    overrides = config_mod.parse_overrides(args.set)
    if args.seed is not None:
        overrides["paths.seed"] = str(args.seed)
    if args.out is not None:
        overrides["output.dir"] = args.out
    return cfg.with_overrides(overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    code = 0
    try:
        if args.command == "barrier-curve":
            files = cmd_barrier_curve(cfg, args.points)
        elif args.command == "value-surface":
            files = cmd_value_surface(cfg, _linspace(args.t), _linspace(args.r), _floats(args.x), args.h)
        elif args.command == "hjb-check":
            files = cmd_hjb_check(cfg, _linspace(args.t), _linspace(args.r), args.h)
        elif args.command == "simulate":
            files = cmd_simulate(cfg, args.strategy, args.setting, args.trace)
            for f in files:
                print(f)
            return 0
        elif args.command == "stochastic-barrier":
            files = cmd_stochastic_barrier(cfg, _linspace(args.r), _linspace(args.z), _linspace(args.t))
        else:
            only = [int(v) for v in args.only.split(",") if v.strip()]
            code, files = cmd_verify(cfg, only or None)
    except AssumptionViolation as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_manifest(cfg, args.command, files, time.perf_counter() - start)
    for f in files:
        print(f)
    return code


if __name__ == "__main__":
    sys.exit(main())
