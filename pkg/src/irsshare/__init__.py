"""Shared intelligent reflecting surfaces for multiple mobile network operators.

Channel synthesis, max-min phase optimisation, the sharing schemes and a
Monte Carlo harness that sweeps element count and operator count.
"""
from .channel import CascadedChannel, apply_rician, los_cascade, snr, user_rate
from .optimizer import (
    OptimizerOptions,
    ascent_direction,
    brute_force_maxmin,
    conjugate_match,
    evaluate_min_rate,
    optimize_maxmin,
    project_unit_modulus,
)
from .scenario import LinkBudget, Scenario, derive_link_budget, element_positions, place_users
from .schemes import SCHEME_IDS, SchemeResult, run_scheme

__version__ = "0.1.0"

__all__ = [
    "CascadedChannel", "LinkBudget", "OptimizerOptions", "SCHEME_IDS", "Scenario", "SchemeResult",
    "apply_rician", "ascent_direction", "brute_force_maxmin", "conjugate_match",
    "derive_link_budget", "element_positions", "evaluate_min_rate", "los_cascade",
    "optimize_maxmin", "place_users", "project_unit_modulus", "run_scheme", "snr", "user_rate",
]
