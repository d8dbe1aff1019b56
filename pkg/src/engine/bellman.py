"""
Bellman operator and backward-sweep cut construction.

Case I fits the hyperplane through (T Q)(y) at the successors of the
reference state; it is used when Q passes the local submodularity check.
Case II falls back to the supporting cut of Q with the lowest Bellman
value at the reference state and fits through T applied to that cut.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from src.problems.base import Decision, ProblemDefinition, successors
from src.values.pwa import (
    Hyperplane,
    SubmodularityReport,
    evaluate_points,
    fit_hyperplane,
    is_submodular_near,
)

logger = logging.getLogger(__name__)


class CutCase(Enum):
    CASE_I = "case1"
    CASE_II = "case2"


@dataclass
class BellmanResult:
    value: float
    decision: Decision


@dataclass
class CutResult:
    """A fitted cut plus how it was obtained."""

    hyperplane: Hyperplane
    case: CutCase
    report: Optional[SubmodularityReport] = None
    j_star: Optional[int] = None


def bellman_apply(problem: ProblemDefinition, f: Callable, x) -> BellmanResult:
    """(T f)(x) together with the maximising decision."""
    continuation = evaluate_points(f, successors(x, problem.space))
    decision, value = problem.best_decision(x, continuation)
    return BellmanResult(value=float(value), decision=decision)


def interpolation_values(problem: ProblemDefinition, f: Callable, x_ref,
                         eps_opt: float = 0.0) -> np.ndarray:
    """
    (T f)(y) + eps_opt for y in successors(x_ref).

    A successor outside the box takes the anchor value plus the problem's
    saturation slope in that dimension.
    """
    points = successors(x_ref, problem.space)
    values = np.empty(points.shape[0])
    values[0] = bellman_apply(problem, f, points[0]).value + eps_opt
    for s in range(1, points.shape[0]):
        if problem.space.contains(points[s]):
            values[s] = bellman_apply(problem, f, points[s]).value + eps_opt
        else:
            values[s] = values[0] + problem.saturation_slope(s - 1)
    return values


def case1_cut(problem: ProblemDefinition, q_next: Callable, x_ref,
              eps_opt: float = 0.0) -> Hyperplane:
    """Hyperplane through T Q_next at the successors of x_ref."""
    return fit_hyperplane(x_ref, interpolation_values(problem, q_next, x_ref, eps_opt))


def case2_cut(problem: ProblemDefinition, q_next, x_ref, eps_opt: float = 0.0,
              tie_tol: Optional[float] = None) -> tuple[Hyperplane, int]:
    """
    Fallback cut from a single supporting hyperplane of Q_next.

    Returns the fitted cut and the (0-based) index of the chosen supporting cut.
    """
    if not hasattr(q_next, "supporting_indices"):
        raise ValueError("Case II needs a cut-based continuation")
    candidates = q_next.supporting_indices(x_ref, tie_tol)
    scores = [bellman_apply(problem, q_next.cut(j), x_ref).value for j in candidates]
    # np.argmin keeps the first minimum, i.e. the lowest cut index
    j_star = candidates[int(np.argmin(scores))]
    return case1_cut(problem, q_next.cut(j_star), x_ref, eps_opt), j_star


def backward_cut(problem: ProblemDefinition, q_next, x_ref, eps_opt: float = 0.0,
                 tie_tol: Optional[float] = None,
                 sub_tol: Optional[float] = None) -> CutResult:
    """Case I when Q_next is submodular around x_ref, Case II otherwise."""
    report = is_submodular_near(q_next, x_ref, sub_tol)
    if report.submodular:
        return CutResult(case1_cut(problem, q_next, x_ref, eps_opt), CutCase.CASE_I, report)

    logger.debug(
        f"[CASE_II] Continuation not submodular near {np.asarray(x_ref).tolist()} "
        f"(violation {report.worst_violation:.3g} at {report.worst_pair})"
    )
    hyperplane, j_star = case2_cut(problem, q_next, x_ref, eps_opt, tie_tol)
    return CutResult(hyperplane, CutCase.CASE_II, report, j_star)
