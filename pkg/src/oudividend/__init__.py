"""Optimal dividend barriers under Ornstein-Uhlenbeck discounting."""

from .barrier import Decision, Horizon, alpha, barrier_curve, classify
from .horizon import (
    FirstPassageLaw,
    HealthyParams,
    barrier_level,
    first_passage_density,
    horizon_discount,
    horizon_discount_series,
    policy_stochastic,
    survival_probability,
    theta_n,
)
from .ou_kernel import AssumptionViolation, OUParams, discount_mgf, log_discount_mgf, tilde_b
from .quadrature import QuadratureConfig
from .value import SurplusParams, gamma, tilde_G, value_function, value_max_payout

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation",
    "Decision",
    "FirstPassageLaw",
    "HealthyParams",
    "Horizon",
    "OUParams",
    "QuadratureConfig",
    "SurplusParams",
    "alpha",
    "barrier_curve",
    "barrier_level",
    "classify",
    "discount_mgf",
    "first_passage_density",
    "gamma",
    "horizon_discount",
    "horizon_discount_series",
    "log_discount_mgf",
    "policy_stochastic",
    "survival_probability",
    "theta_n",
    "tilde_G",
    "tilde_b",
    "value_function",
    "value_max_payout",
]
