"""
State lattice, horizon and the abstract problem contract.

Every concrete dynamic program (AHD slot pricing, table-driven problems)
implements ProblemDefinition. Implementations must be immutable after
construction: simulation workers share one instance.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.values.pwa import Hyperplane, lattice_box, local_offsets

PROBABILITY_TOL = 1e-12


class DecisionOracleError(Exception):
    """Raised when a problem cannot produce a feasible decision."""

    def __init__(self, message: str, code: str = "NO_FEASIBLE_DECISION"):
        super().__init__(message)
        self.code = code


def as_state(x) -> np.ndarray:
    """Integer state vector."""
    return np.asarray(x, dtype=np.int64).reshape(-1)


@dataclass(frozen=True)
class StateSpace:
    """Box X = {x : 0 <= x <= x_bar} on the integer lattice."""

    x_bar: tuple[int, ...]

    def __post_init__(self):
        x_bar = tuple(int(v) for v in self.x_bar)
        if len(x_bar) < 1:
            raise ValueError("State space needs at least one dimension")
        if any(v < 0 for v in x_bar):
            raise ValueError(f"x_bar must be nonnegative, got {x_bar}")
        object.__setattr__(self, "x_bar", x_bar)

    @property
    def n(self) -> int:
        return len(self.x_bar)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.x_bar, dtype=np.int64)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v + 1 for v in self.x_bar)

    @property
    def cardinality(self) -> int:
        return math.prod(self.shape)

    def check_dimension(self, x) -> np.ndarray:
        x = as_state(x)
        if x.shape[0] != self.n:
            raise ValueError(f"State {x.tolist()} has dimension {x.shape[0]}, expected {self.n}")
        return x

    def contains(self, x) -> bool:
        x = self.check_dimension(x)
        return bool(np.all(x >= 0) and np.all(x <= self.upper))

    def saturated(self, x) -> np.ndarray:
        """Dimensions with no remaining capacity (x_s >= x_bar_s)."""
        return self.check_dimension(x) >= self.upper

    def index(self, x) -> int:
        """Row-major (lexicographic) position of a feasible state."""
        return int(np.ravel_multi_index(tuple(self.check_dimension(x)), self.shape))

    def states(self) -> np.ndarray:
        """All feasible states, lexicographic order."""
        return lattice_box(self.x_bar)


@dataclass(frozen=True)
class HorizonSpec:
    """Decision epochs T = {1, ..., t_bar}; settlement happens at t_bar + 1."""

    t_bar: int

    def __post_init__(self):
        if int(self.t_bar) < 1:
            raise ValueError(f"t_bar must be >= 1, got {self.t_bar}")

    @property
    def terminal(self) -> int:
        return self.t_bar + 1

    def steps(self) -> range:
        return range(1, self.t_bar + 1)


@dataclass(frozen=True)
class Decision:
    """
    One control per dimension; None marks a closed slot (price infinity).

    Problems with a finite decision menu store the menu index as the single control.
    """

    controls: tuple[Optional[float], ...]

    @classmethod
    def all_closed(cls, n: int) -> "Decision":
        return cls(tuple(None for _ in range(n)))

    def is_closed(self, s: int) -> bool:
        return self.controls[s] is None

    def to_json(self) -> list:
        return ["closed" if c is None else c for c in self.controls]

    @classmethod
    def from_json(cls, values: list) -> "Decision":
        return cls(tuple(None if v == "closed" else float(v) for v in values))


@dataclass(frozen=True, eq=False)
class TransitionDistribution:
    """Probabilities over successors(x): index 0 is stay, index s is x + e_s."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < 0):
            raise ValueError(f"Negative transition probability: {probs.tolist()}")
        if abs(probs.sum() - 1.0) > PROBABILITY_TOL:
            raise ValueError(f"Transition probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "probs", probs)

    @property
    def stay(self) -> float:
        return float(self.probs[0])

    def purchase(self, s: int) -> float:
        """Probability of moving to x + e_s (s is 0-based)."""
        return float(self.probs[s + 1])


def successors(x, space: StateSpace) -> np.ndarray:
    """
    Y_+(x) as rows: [x, x + e_1, ..., x + e_n].

    Points beyond x_bar are returned too; problems give them probability 0.
    """
    x = space.check_dimension(x)
    return np.vstack([x, x + np.eye(space.n, dtype=np.int64)])


def local_check_set(x) -> np.ndarray:
    """Z(x) = {x + e_s + e_s' : s, s' in S and stay}, deduplicated, x first."""
    x = as_state(x)
    return x + local_offsets(x.shape[0])


class ProblemDefinition(ABC):
    """Abstract contract for a finite-horizon DP on a box of the integer lattice."""

    def __init__(self, space: StateSpace, horizon: HorizonSpec):
        self.space = space
        self.horizon = horizon

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def t_bar(self) -> int:
        return self.horizon.t_bar

    @classmethod
    def from_config(cls, config: dict) -> "ProblemDefinition":
        """Build an instance from the `problem` config block."""
        raise NotImplementedError(f"{cls.__name__} cannot be built from config")

    @abstractmethod
    def transition(self, x, d: Decision) -> TransitionDistribution:
        """P_{x,y}(d) over successors(x)."""
        pass

    @abstractmethod
    def stage_revenue(self, x, y, d: Decision) -> float:
        """g(x, y, d) for y in successors(x)."""
        pass

    @abstractmethod
    def terminal_cost(self, x) -> float:
        """C(x); +inf outside the box."""
        pass

    @abstractmethod
    def best_decision(self, x, continuation: np.ndarray) -> tuple[Decision, float]:
        """
        Maximise sum_y P_{x,y}(d) (g(x,y,d) + continuation[y]) over d.

        `continuation` holds the continuation values at successors(x) in order.
        Entries for successors outside the box are never weighted.
        """
        pass

    @abstractmethod
    def initial_upper_bound(self) -> Hyperplane:
        """Affine function dominating every V_t on the box."""
        pass

    def terminal_value(self, x) -> float:
        """
        -C(x) on the box, continued affinely beyond it.

        Cut fitting and local submodularity checks evaluate the terminal
        function just outside X; a finite extension keeps them well defined.
        """
        return -self.terminal_cost(x)

    def saturation_slope(self, s: int) -> float:
        """
        Lower bound on V_t(x) - V_t(x - e_s) for every t and x in the box.

        Used as the cut slope in dimensions where the anchor is saturated.
        """
        return float(self.initial_upper_bound().a[s])

    def default_eps_opt(self) -> float:
        """Declared optimality tolerance of best_decision."""
        return 0.0

    def describe(self) -> dict:
        """Short description for banners and summaries."""
        return {
            "type": type(self).__name__,
            "n": self.n,
            "x_bar": list(self.space.x_bar),
            "t_bar": self.t_bar,
            "states": self.space.cardinality,
        }
