"""Nested and multilevel stochastic approximation of VaR and ES.

The package estimates the Value-at-Risk and Expected Shortfall of a loss
``X0 = E[phi(Y, Z) | Y]`` that can only be simulated through an inner
Monte Carlo average.  Three estimators share one two-time-scale recursion:
classical SA on exact losses, nested SA with ``K`` inner draws, and a
multilevel SA telescoping over a geometric ladder of inner sample counts.
"""

from mlsa_risk.measures import EstimatePair, RiskLevel, h1, h2, empirical_v
from mlsa_risk.models import (
    LossModel,
    OptionModel,
    OptionParams,
    SwapModel,
    SwapParams,
    option_truth,
    swap_truth,
)
from mlsa_risk.samplers import BiasParam, LevelLadder, stream
from mlsa_risk.engine import (
    DivergenceError,
    StepSchedule,
    run_mlsa,
    run_nested_sa,
    run_sa,
)
from mlsa_risk.tuning import Scenario, es_allocation, level_count, nsa_tuning, var_allocation

__version__ = "0.1.0"

__all__ = [
    "EstimatePair", "RiskLevel", "h1", "h2", "empirical_v",
    "LossModel", "OptionModel", "OptionParams", "SwapModel", "SwapParams",
    "option_truth", "swap_truth",
    "BiasParam", "LevelLadder", "stream",
    "DivergenceError", "StepSchedule", "run_sa", "run_nested_sa", "run_mlsa",
    "Scenario", "nsa_tuning", "level_count", "var_allocation", "es_allocation",
]
