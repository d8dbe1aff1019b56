"""
Verification utilities for desk-scale instances.

Functions over the box are passed as value vectors in lexicographic state
order (or as callables, which are tabulated first).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import linprog

from src.problems.base import StateSpace
from src.values.pwa import SUB_TOL_FACTOR, SubmodularityReport, ValueStack, evaluate_points

from .exact import ExactValueTable

logger = logging.getLogger(__name__)

MAX_PAIRS = 100_000_000
MAX_CLOSURE_STATES = 10_000
MAX_CLOSURE_DIM = 3
PROP1_SLACK = 1e-8
EXTENSIBLE_TOL = 1e-8
CONVERGED_TOL = 1e-6

FunctionOnBox = Union[np.ndarray, Callable]


def tabulate(f: FunctionOnBox, space: StateSpace) -> np.ndarray:
    """Values of f at every state of the box, lexicographic order."""
    if callable(f):
        return evaluate_points(f, space.states())
    values = np.asarray(f, dtype=float).reshape(-1)
    if values.shape[0] != space.cardinality:
        raise ValueError(f"Expected {space.cardinality} values, got {values.shape[0]}")
    return values


@dataclass
class UpperBoundReport:
    """Worst signed gap min over (x, t) of Q_t(x) - V_t(x)."""

    worst_gap: float
    argmin_state: tuple[int, ...]
    argmin_t: int
    q_value: float
    v_value: float

    def passed(self, tolerance: float = PROP1_SLACK) -> bool:
        return self.worst_gap >= -tolerance

    def to_dict(self) -> dict:
        return {
            "worst_gap": self.worst_gap,
            "argmin_state": list(self.argmin_state),
            "argmin_t": self.argmin_t,
            "q_value": self.q_value,
            "v_value": self.v_value,
        }


def verify_upper_bound(stack: ValueStack, table: ExactValueTable) -> UpperBoundReport:
    """Exact scan of Q_t - V_t over the box and t = 1..t_bar."""
    if stack.t_bar != table.t_bar or stack.n != table.space.n:
        raise ValueError(
            f"Stack (t_bar={stack.t_bar}, n={stack.n}) does not match table "
            f"(t_bar={table.t_bar}, n={table.space.n})"
        )
    states = table.space.states()
    worst: Optional[UpperBoundReport] = None
    for t in range(1, table.t_bar + 1):
        q = stack.q(t).evaluate_many(states)
        v = table.layer(t)
        gaps = q - v
        k = int(np.argmin(gaps))
        if worst is None or gaps[k] < worst.worst_gap:
            worst = UpperBoundReport(
                worst_gap=float(gaps[k]),
                argmin_state=tuple(int(c) for c in states[k]),
                argmin_t=t,
                q_value=float(q[k]),
                v_value=float(v[k]),
            )
    return worst


def check_submodular_all(f: FunctionOnBox, space: StateSpace,
                         sub_tol: Optional[float] = None) -> SubmodularityReport:
    """Submodularity over every pair of the box (closed under max/min)."""
    values = tabulate(f, space)
    states = space.states()
    m = states.shape[0]
    if m * (m - 1) // 2 > MAX_PAIRS:
        raise ValueError(f"{m} states give too many pairs for a full submodularity scan")
    if sub_tol is None:
        sub_tol = SUB_TOL_FACTOR * (1.0 + float(np.max(np.abs(values))))

    worst_violation, worst_pair = -np.inf, None
    for i in range(m - 1):
        y = states[i]
        z = states[i + 1:]
        hi = np.ravel_multi_index(tuple(np.maximum(y, z).T), space.shape)
        lo = np.ravel_multi_index(tuple(np.minimum(y, z).T), space.shape)
        violation = values[hi] + values[lo] - values[i] - values[i + 1:]
        k = int(np.argmax(violation))
        if violation[k] > worst_violation:
            worst_violation = float(violation[k])
            worst_pair = (tuple(int(c) for c in y), tuple(int(c) for c in z[k]))

    if worst_pair is None:
        return SubmodularityReport(submodular=True, tolerance=float(sub_tol))
    return SubmodularityReport(
        submodular=worst_violation <= sub_tol,
        worst_violation=max(worst_violation, 0.0),
        worst_pair=worst_pair,
        tolerance=float(sub_tol),
    )


def _check_closure_size(space: StateSpace) -> None:
    if space.n > MAX_CLOSURE_DIM or space.cardinality > MAX_CLOSURE_STATES:
        raise ValueError(
            f"Concave closure is limited to n <= {MAX_CLOSURE_DIM} and "
            f"|X| <= {MAX_CLOSURE_STATES} (got n={space.n}, |X|={space.cardinality})"
        )


def closure_applicable(space: StateSpace) -> bool:
    return space.n <= MAX_CLOSURE_DIM and space.cardinality <= MAX_CLOSURE_STATES


def _closure(values: np.ndarray, states: np.ndarray, x: np.ndarray) -> float:
    # min over (a, b) of a.x + b  subject to  a.y + b >= f(y) for every y in the box
    rows = np.hstack([states.astype(float), np.ones((states.shape[0], 1))])
    result = linprog(
        c=np.append(x.astype(float), 1.0),
        A_ub=-rows,
        b_ub=-values,
        bounds=[(None, None)] * rows.shape[1],
        method="highs-ds",
    )
    if result.status != 0:
        raise RuntimeError(f"Concave closure LP failed at {x.tolist()}: {result.message}")
    return float(result.fun)


def concave_closure_at(f: FunctionOnBox, space: StateSpace, x) -> float:
    """Value of the concave closure of f (taken as -inf off the box) at x."""
    _check_closure_size(space)
    return _closure(tabulate(f, space), space.states(), space.check_dimension(x))


@dataclass
class ExtensibilityReport:
    extensible: bool
    worst_gap: float = 0.0
    worst_state: Optional[tuple[int, ...]] = None

    def __bool__(self) -> bool:
        return bool(self.extensible)


def check_concave_extensible(f: FunctionOnBox, space: StateSpace,
                             tol: Optional[float] = None) -> ExtensibilityReport:
    """f coincides with its concave closure at every state of the box."""
    _check_closure_size(space)
    values = tabulate(f, space)
    states = space.states()
    if tol is None:
        tol = EXTENSIBLE_TOL * max(1.0, float(np.max(np.abs(values))))
    worst_gap, worst_state = 0.0, None
    for k, x in enumerate(states):
        gap = _closure(values, states, x) - values[k]
        if gap > worst_gap:
            worst_gap, worst_state = gap, tuple(int(c) for c in x)
    return ExtensibilityReport(worst_gap <= tol, worst_gap, worst_state)


def verification_report(stack: ValueStack, table: ExactValueTable,
                        eps_opt: float = 0.0) -> dict:
    """Verdicts for the `verify` command."""
    bound = verify_upper_bound(stack, table)
    prop1_pass = bound.passed(table.t_bar * eps_opt + PROP1_SLACK)
    if not prop1_pass:
        logger.warning(
            f"[VERIFY_FAIL] Q_{bound.argmin_t}{list(bound.argmin_state)} = {bound.q_value!r} "
            f"below V = {bound.v_value!r}"
        )

    submodular_all = True
    for t in range(1, table.t_bar + 2):
        report = check_submodular_all(table.layer(t), table.space)
        if not report:
            logger.warning(
                f"[VERIFY_FAIL] V_{t} not submodular: violation "
                f"{report.worst_violation:.3g} at {report.worst_pair}"
            )
            submodular_all = False
            break

    extensible_all: Optional[bool] = None
    if closure_applicable(table.space):
        extensible_all = True
        for t in range(1, table.t_bar + 2):
            report = check_concave_extensible(table.layer(t), table.space)
            if not report:
                logger.warning(
                    f"[VERIFY_FAIL] V_{t} not concave extensible: gap "
                    f"{report.worst_gap:.3g} at {report.worst_state}"
                )
                extensible_all = False
                break
    else:
        logger.info("Skipping concave extensibility check: instance too large for the closure LP")

    origin = np.zeros(table.space.n, dtype=np.int64)
    u = stack.q(1).evaluate(origin)
    return {
        "prop1_worst_gap": bound.worst_gap,
        "worst_gap": bound.worst_gap,
        "prop1_pass": prop1_pass,
        "argmin_state": list(bound.argmin_state),
        "argmin_t": bound.argmin_t,
        "submodular_all_t": submodular_all,
        "submodular_all": submodular_all,
        "concave_extensible_all_t": extensible_all,
        "concave_extensible_all": extensible_all,
        "converged": abs(u - table.v1_origin) <= CONVERGED_TOL,
        "upper_bound": u,
        "exact_value": table.v1_origin,
    }


def verification_passed(report: dict) -> bool:
    """Upper bound, submodularity and (when checked) extensibility must all hold."""
    return bool(
        report["prop1_pass"]
        and report["submodular_all_t"]
        and report["concave_extensible_all_t"] is not False
    )
