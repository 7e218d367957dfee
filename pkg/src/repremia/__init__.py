"""Optimal reinsurance under a reward-and-penalty variable premium scheme.

Submodules:

* :mod:`repremia.dist`: loss models (Pareto, exponential, tabulated).
* :mod:`repremia.indemnity`: ceded-loss functions and layered families.
* :mod:`repremia.premium`: the variable premium and position transforms.
* :mod:`repremia.riskmeasure`: distortion risk measures of positions.
* :mod:`repremia.insurer_solver`: the insurer's optimal contract.
* :mod:`repremia.bowley`: the reinsurer's choice of the scheme slope.
* :mod:`repremia.oracle`: brute-force, Monte Carlo and convex-order checks.
"""

from .bowley import BowleyConfig, BowleyReport, beta_curve, delta_grid, sweep, theta1_rule
from .dist import LossModel, exponential, pareto, tabulated
from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    InfeasibleError,
    ReinsuranceError,
    SingularityError,
)
from .indemnity import Indemnity, complete_I1, complete_I2
from .insurer_solver import H, SolveReport, solve_inner_scan, solve_inner_tvar, solve_insurer
from .premium import PremiumParams, SchemeThresholds, expected_premium, realized_premium
from .pwl import PiecewiseLinear
from .riskmeasure import Distortion, rho_monotone_transform, rho_T_I1_closed, rho_T_I2_closed

__version__ = "0.1.0"

__all__ = [
    "BowleyConfig", "BowleyReport", "beta_curve", "delta_grid", "sweep", "theta1_rule",
    "LossModel", "exponential", "pareto", "tabulated",
    "ConfigError", "ConstructionError", "DomainError", "InfeasibleError", "ReinsuranceError", "SingularityError",
    "Indemnity", "complete_I1", "complete_I2",
    "H", "SolveReport", "solve_inner_scan", "solve_inner_tvar", "solve_insurer",
    "PremiumParams", "SchemeThresholds", "expected_premium", "realized_premium",
    "PiecewiseLinear",
    "Distortion", "rho_monotone_transform", "rho_T_I1_closed", "rho_T_I2_closed",
]
