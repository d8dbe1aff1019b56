"""
Exact backward induction over the whole state box.

Only feasible for desk-scale instances: the work grows with |X| * t_bar,
and |X| is exponential in the number of dimensions.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from src.engine.bellman import bellman_apply
from src.problems.base import ProblemDefinition, StateSpace, as_state, successors
from src.workers import run_ordered

logger = logging.getLogger(__name__)

DEFAULT_CAP = 10_000_000


class ExactSolveRefused(Exception):
    """Raised when the state-time pair count exceeds the configured cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(
            f"Exact solve needs {required:.3g} state-time evaluations (cap {cap:.3g})"
        )
        self.required = required
        self.cap = cap
        self.code = "EXACT_CAP_EXCEEDED"


class _LayerFunction:
    """One time layer of the table as a point-evaluable function.

    Points outside the box evaluate to 0; they only ever appear with
    probability 0.
    """

    def __init__(self, space: StateSpace, layer: np.ndarray):
        self._space = space
        self._layer = layer

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        inside = np.all((points >= 0) & (points <= self._space.upper), axis=1)
        out = np.zeros(points.shape[0])
        if np.any(inside):
            flat = np.ravel_multi_index(tuple(points[inside].T), self._space.shape)
            out[inside] = self._layer[flat]
        return out

    def __call__(self, x) -> float:
        return float(self.evaluate_many(as_state(x)[None, :])[0])


class _TableStack:
    """Read-only stack view whose continuations are the exact layers."""

    frozen = True

    def __init__(self, table: "ExactValueTable"):
        self._table = table
        self.t_bar = table.t_bar
        self.n = table.space.n

    def continuation(self, t: int) -> _LayerFunction:
        return _LayerFunction(self._table.space, self._table.layer(t))


@dataclass
class ExactValueTable:
    """V_t(x) for t = 1..t_bar+1, rows by t, columns in lexicographic state order."""

    space: StateSpace
    t_bar: int
    values: np.ndarray

    def __post_init__(self):
        expected = (self.t_bar + 1, self.space.cardinality)
        if self.values.shape != expected:
            raise ValueError(f"Table shape {self.values.shape} does not match {expected}")

    def layer(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.t_bar + 1:
            raise IndexError(f"Time step {t} outside 1..{self.t_bar + 1}")
        return self.values[t - 1]

    def value(self, t: int, x) -> float:
        if not self.space.contains(x):
            raise IndexError(f"State {as_state(x).tolist()} outside the box")
        return float(self.layer(t)[self.space.index(x)])

    @property
    def v1_origin(self) -> float:
        return self.value(1, np.zeros(self.space.n, dtype=np.int64))

    def function(self, t: int) -> _LayerFunction:
        return _LayerFunction(self.space, self.layer(t))

    def as_value_stack(self) -> _TableStack:
        """Stack view for simulating the exact policy."""
        return _TableStack(self)

    def save(self, path: Path) -> None:
        """Header of int64 (n, t_bar, x_bar...), then float64 values row-major by (t, x)."""
        header = np.array([self.space.n, self.t_bar, *self.space.x_bar], dtype="<i8")
        with open(path, "wb") as f:
            header.tofile(f)
            np.ascontiguousarray(self.values, dtype="<f8").tofile(f)

    @classmethod
    def load(cls, path: Path) -> "ExactValueTable":
        with open(path, "rb") as f:
            head = np.fromfile(f, dtype="<i8", count=2)
            if head.shape[0] != 2 or head[0] < 1:
                raise ValueError(f"{path} is not an exact value table")
            n, t_bar = int(head[0]), int(head[1])
            x_bar = np.fromfile(f, dtype="<i8", count=n)
            space = StateSpace(tuple(int(v) for v in x_bar))
            values = np.fromfile(f, dtype="<f8")
        expected = (t_bar + 1) * space.cardinality
        if values.shape[0] != expected:
            raise ValueError(f"{path} holds {values.shape[0]} values, expected {expected}")
        return cls(space, t_bar, values.reshape(t_bar + 1, space.cardinality))


def required_evaluations(problem: ProblemDefinition) -> int:
    return problem.space.cardinality * problem.t_bar


def exact_solve(problem: ProblemDefinition, cap: int = DEFAULT_CAP,
                max_workers: Optional[int] = None) -> ExactValueTable:
    """Bottom-up recursion with the problem's own decision oracle."""
    required = required_evaluations(problem)
    if required > cap:
        logger.warning(f"[EXACT_REFUSED] {required:.3g} evaluations required, cap is {cap}")
        raise ExactSolveRefused(required, cap)

    space = problem.space
    states = space.states()
    values = np.empty((problem.t_bar + 1, space.cardinality))
    values[problem.t_bar] = [-problem.terminal_cost(x) for x in states]

    for t in range(problem.t_bar, 0, -1):
        following = _LayerFunction(space, values[t])
        values[t - 1] = run_ordered(
            lambda x: bellman_apply(problem, following, x).value, states, max_workers
        )
        logger.debug(f"Exact layer t={t} done")

    table = ExactValueTable(space, problem.t_bar, values)
    logger.info(f"Exact solve finished: V_1(0) = {table.v1_origin:.6f}")
    return table


def solve_top_down(problem: ProblemDefinition) -> ExactValueTable:
    """
    Memoised recursion that re-sums each objective from P and g.

    Slower than exact_solve; used to cross-check it.
    """
    space = problem.space

    @lru_cache(maxsize=None)
    def value(t: int, x: tuple) -> float:
        if t == problem.t_bar + 1:
            return -problem.terminal_cost(x)
        points = successors(x, space)
        continuation = [value(t + 1, tuple(y)) if space.contains(y) else 0.0 for y in points]
        decision, _ = problem.best_decision(np.array(x), np.array(continuation))
        probs = problem.transition(x, decision).probs
        return sum(
            p * (problem.stage_revenue(x, y, decision) + c)
            for p, y, c in zip(probs, points, continuation)
            if p > 0
        )

    states = [tuple(int(c) for c in x) for x in space.states()]
    values = np.empty((problem.t_bar + 1, space.cardinality))
    # Fill from the end so the recursion never nests more than one level
    for t in range(problem.t_bar + 1, 0, -1):
        values[t - 1] = [value(t, x) for x in states]
    return ExactValueTable(space, problem.t_bar, values)
