"""Separating curve for the fixed-horizon problem and the pay/wait rule."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ou_kernel import OUParams, tilde_b

# below this a(T-t) the ratio x / (1 - e^{-x}) switches to its Taylor series
_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class Horizon:
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon T must be finite and > 0, got {self.T}")


class Decision(enum.Enum):
    PAY = "pay"
    WAIT = "wait"


def _x_over_one_minus_exp(x):
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + x / 2.0 + x * x / 12.0, safe / -np.expm1(-safe))
    return out


def alpha(t, horizon: Horizon, params: OUParams):
    """Barrier rate ``alpha(t)``: ``M(T - t, alpha(t)) = 1``.

    Defined for any sign of ``tilde_b``; ``alpha(T) = 0``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > horizon.T):
        raise ValueError(f"t must lie in [0, {horizon.T}]")
    a, d = params.a, params.delta
    x = a * (horizon.T - t_arr)
    out = tilde_b(params) * (1.0 - _x_over_one_minus_exp(x)) - d**2 / (4.0 * a**2) * -np.expm1(-x)
    return out[()] if out.ndim == 0 else out


def classify(t: float, r: float, horizon: Horizon, params: OUParams) -> Decision:
    """Pay at the maximal rate strictly above the curve; wait on or below it."""
    if not 0 <= t < horizon.T:
        raise ValueError(f"classify needs 0 <= t < T, got t={t}")
    return Decision.PAY if r > alpha(t, horizon, params) else Decision.WAIT


def barrier_curve(horizon: Horizon, params: OUParams, n_points: int = 501):
    """``(t, alpha(t))`` sampled on ``n_points`` equally spaced times in ``[0, T]``."""
    t = np.linspace(0.0, horizon.T, n_points)
    t[-1] = horizon.T
    return t, alpha(t, horizon, params)
