from .ahd import AhdPricingProblem, MnlParams
from .base import (
    Decision,
    DecisionOracleError,
    HorizonSpec,
    ProblemDefinition,
    StateSpace,
    TransitionDistribution,
    local_check_set,
    successors,
)
from .tabular import MenuOption, TabularProblem

# Map problem types to classes
PROBLEM_TYPES = {
    "ahd": AhdPricingProblem,
    "tabular": TabularProblem,
}

__all__ = [
    "AhdPricingProblem",
    "Decision",
    "DecisionOracleError",
    "HorizonSpec",
    "MenuOption",
    "MnlParams",
    "PROBLEM_TYPES",
    "ProblemDefinition",
    "StateSpace",
    "TabularProblem",
    "TransitionDistribution",
    "local_check_set",
    "successors",
]
