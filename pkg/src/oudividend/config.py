"""Run configuration: flat ``section.key = value`` text with strict parsing.

Unknown keys, duplicate keys and malformed values are errors.  :func:`dump`
writes every key in a fixed order with round-trippable number formatting, so
``dump(parse(dump(cfg))) == dump(cfg)`` byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .barrier import Horizon
from .horizon import HealthyParams
from .mc import FixedHorizonProblem, PathConfig, RandomHorizonProblem
from .ou_kernel import OUParams
from .quadrature import QuadratureConfig
from .value import SurplusParams


class ConfigError(ValueError):
    pass


def _auto_float(text: str):
    return None if text == "auto" else float(text)


# key -> (parser, default); order here is the dump order
SCHEMA: dict[str, tuple] = {
    "ou.a": (float, 1.0),
    "ou.b": (float, 0.51),
    "ou.delta": (float, 1.0),
    "ou.r0": (float, 0.0),
    "surplus.mu": (float, 1.0),
    "surplus.sigma": (float, 0.5),
    "surplus.xi": (float, 1.0),
    "surplus.x0": (float, 1.0),
    "horizon.T": (float, 5.0),
    "healthy.zeta": (float, 0.5),
    "healthy.l0": (float, 0.0),
    "quadrature.rel_tol": (float, 1e-8),
    "quadrature.abs_tol": (float, 1e-12),
    "quadrature.max_subdivisions": (int, 400),
    "quadrature.z_trunc_sigmas": (float, 8.0),
    "paths.dt": (float, 1e-3),
    "paths.n_paths": (int, 100_000),
    "paths.seed": (int, 12345),
    "paths.t_max": (_auto_float, None),
    "paths.workers": (int, 1),
    "output.dir": (str, "out"),
}


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __post_init__(self):
        # build every component once so invalid settings fail at parse time
        self.ou()
        self.surplus()
        self.horizon()
        self.quadrature()
        self.paths()
        if not math.isfinite(self.values["surplus.x0"]):
            raise ConfigError("surplus.x0 must be finite")

    def __getitem__(self, key):
        return self.values[key]

    def ou(self) -> OUParams:
        v = self.values
        return OUParams(v["ou.a"], v["ou.b"], v["ou.delta"], v["ou.r0"])

    def surplus(self) -> SurplusParams:
        v = self.values
        return SurplusParams(v["surplus.mu"], v["surplus.sigma"], v["surplus.xi"])

    def horizon(self) -> Horizon:
        return Horizon(self.values["horizon.T"])

    def healthy(self) -> HealthyParams:
        v = self.values
        hp = HealthyParams(v["healthy.zeta"], v["surplus.x0"] - v["healthy.l0"])
        hp.validate_against(v["surplus.mu"])
        return hp

    def quadrature(self) -> QuadratureConfig:
        v = self.values
        return QuadratureConfig(v["quadrature.rel_tol"], v["quadrature.abs_tol"],
                                v["quadrature.max_subdivisions"], v["quadrature.z_trunc_sigmas"])

    def paths(self) -> PathConfig:
        v = self.values
        return PathConfig(v["paths.dt"], v["paths.n_paths"], v["paths.seed"], v["paths.t_max"], (), v["paths.workers"])

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output.dir"])

    def fixed_problem(self) -> FixedHorizonProblem:
        return FixedHorizonProblem(self.ou(), self.surplus(), self.horizon(), self.values["surplus.x0"])

    def random_problem(self) -> RandomHorizonProblem:
        return RandomHorizonProblem(self.ou(), self.surplus(), self.healthy(), self.values["surplus.x0"])

    def with_overrides(self, pairs: dict[str, str]) -> "RunConfig":
        vals = dict(self.values)
        for key, text in pairs.items():
            vals[key] = _parse_value(key, text)
        return _build(vals)


def _parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser = SCHEMA[key][0]
    try:
        return parser(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def _build(vals: dict) -> RunConfig:
    try:
        return RunConfig(vals)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse(text: str) -> RunConfig:
    vals = {k: d for k, (_, d) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        vals[key] = _parse_value(key, value)
    return _build(vals)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse(text)


def dump(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format(cfg.values[k])}\n" for k in SCHEMA)


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out
