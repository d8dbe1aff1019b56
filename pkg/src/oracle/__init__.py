from .checks import (
    check_concave_extensible,
    check_submodular_all,
    concave_closure_at,
    verification_passed,
    verification_report,
    verify_upper_bound,
)
from .exact import DEFAULT_CAP, ExactSolveRefused, ExactValueTable, exact_solve, solve_top_down

__all__ = [
    "DEFAULT_CAP",
    "ExactSolveRefused",
    "ExactValueTable",
    "check_concave_extensible",
    "check_submodular_all",
    "concave_closure_at",
    "exact_solve",
    "solve_top_down",
    "verification_passed",
    "verification_report",
    "verify_upper_bound",
]
