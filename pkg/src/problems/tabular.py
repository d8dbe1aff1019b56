"""
Table-driven problems with a finite decision menu.

Each menu entry fixes the successor probabilities (stay first) and the
revenue earned on each move. Moves into a saturated dimension are
redirected to stay, mirroring a closed slot. Mainly used for small test
instances and as a second implementation of the problem contract.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .base import (
    PROBABILITY_TOL,
    Decision,
    DecisionOracleError,
    HorizonSpec,
    ProblemDefinition,
    StateSpace,
    TransitionDistribution,
    as_state,
)
from src.values.pwa import Hyperplane

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MenuOption:
    """Successor probabilities and per-move revenues for one decision."""

    probs: np.ndarray
    revenues: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        revenues = np.asarray(self.revenues, dtype=float)
        if probs.shape != revenues.shape or probs.ndim != 1:
            raise ValueError("Menu probs and revenues must be vectors of equal length")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROBABILITY_TOL:
            raise ValueError(f"Menu probabilities must be a distribution: {probs.tolist()}")
        if not np.all(np.isfinite(revenues)):
            raise ValueError("Menu revenues must be finite")
        if revenues[0] != 0.0:
            raise ValueError("Revenue on stay must be 0")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "revenues", revenues)

    @classmethod
    def from_dict(cls, config: dict) -> "MenuOption":
        return cls(np.asarray(config["probs"]), np.asarray(config["revenues"]))


class TabularProblem(ProblemDefinition):
    """Finite menu of transition/revenue tables, affine terminal cost."""

    def __init__(self, x_bar, t_bar: int, menu: list[MenuOption], c_unit: float = 0.0):
        super().__init__(StateSpace(tuple(x_bar)), HorizonSpec(int(t_bar)))
        if not menu:
            raise ValueError("Decision menu must not be empty")
        for k, option in enumerate(menu):
            if option.probs.shape[0] != self.n + 1:
                raise ValueError(
                    f"Menu option {k} has {option.probs.shape[0]} entries, expected {self.n + 1}"
                )
        self.menu = list(menu)
        self.c_unit = float(c_unit)
        self._g_max = max(float(opt.revenues[1:].max()) for opt in self.menu)

    @classmethod
    def from_config(cls, config: dict) -> "TabularProblem":
        return cls(
            x_bar=config["x_bar"],
            t_bar=config["t_bar"],
            menu=[MenuOption.from_dict(entry) for entry in config["menu"]],
            c_unit=config.get("c_unit", 0.0),
        )

    @classmethod
    def stay_only(cls, x_bar, t_bar: int, c_unit: float = 0.0) -> "TabularProblem":
        """Problem whose only decision keeps the state where it is."""
        n = len(x_bar)
        probs = np.zeros(n + 1)
        probs[0] = 1.0
        return cls(x_bar, t_bar, [MenuOption(probs, np.zeros(n + 1))], c_unit)

    def _option(self, d: Decision) -> MenuOption:
        if len(d.controls) != 1 or d.controls[0] is None:
            raise ValueError(f"Tabular decisions carry one menu index, got {d.to_json()}")
        k = int(d.controls[0])
        if not 0 <= k < len(self.menu):
            raise ValueError(f"Menu index {k} out of range")
        return self.menu[k]

    def _effective_probs(self, x, option: MenuOption) -> np.ndarray:
        probs = option.probs.copy()
        blocked = self.space.saturated(x)
        if np.any(blocked):
            moved = probs[1:][blocked].sum()
            probs[1:][blocked] = 0.0
            probs[0] += moved
        return probs

    def transition(self, x, d: Decision) -> TransitionDistribution:
        return TransitionDistribution(self._effective_probs(x, self._option(d)))

    def stage_revenue(self, x, y, d: Decision) -> float:
        step = as_state(y) - as_state(x)
        if not np.any(step):
            return 0.0
        if step.sum() != 1 or np.any(step < 0):
            raise ValueError(f"{as_state(y).tolist()} is not a successor of {as_state(x).tolist()}")
        return float(self._option(d).revenues[int(np.argmax(step)) + 1])

    def terminal_cost(self, x) -> float:
        x = as_state(x)
        if np.any(x < 0) or np.any(x > self.space.upper):
            return math.inf
        return self.c_unit * float(x.sum())

    def terminal_value(self, x) -> float:
        return -self.c_unit * float(as_state(x).sum())

    def best_decision(self, x, continuation: np.ndarray) -> tuple[Decision, float]:
        continuation = np.asarray(continuation, dtype=float)
        best_k, best_value = -1, -math.inf
        for k, option in enumerate(self.menu):
            probs = self._effective_probs(x, option)
            support = probs > 0
            if not np.all(np.isfinite(continuation[support])):
                continue
            value = float(np.sum(probs[support] * (option.revenues[support] + continuation[support])))
            if value > best_value:
                best_k, best_value = k, value
        if best_k < 0:
            raise DecisionOracleError(
                f"No menu option has a finite objective at {as_state(x).tolist()}"
            )
        return Decision((float(best_k),)), best_value

    def initial_upper_bound(self) -> Hyperplane:
        total = float(self.space.upper.sum())
        if self._g_max >= self.c_unit:
            return Hyperplane(np.full(self.n, -self._g_max),
                              self._g_max * total - self.c_unit * total)
        return Hyperplane(np.full(self.n, -self.c_unit), 0.0)

    def describe(self) -> dict:
        info = super().describe()
        info.update(problem="tabular", menu_size=len(self.menu))
        return info
