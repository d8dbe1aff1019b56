"""
Piecewise-affine value approximations.

A value function approximation is the pointwise minimum of affine cuts
H(x) = <a, x> + b. Cuts are append-only while training; once a stack is
frozen it is shared read-only by simulation workers.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Relative factors for the default numerical margins
TIE_TOL_FACTOR = 1e-9
SUB_TOL_FACTOR = 1e-9


def evaluate_points(f: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate f at each row of points, using a vectorised path when f has one."""
    points = np.atleast_2d(np.asarray(points))
    many = getattr(f, "evaluate_many", None)
    if many is not None:
        return np.asarray(many(points), dtype=float)
    return np.array([f(p) for p in points], dtype=float)


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """Affine cut H(x) = <a, x> + b."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = float(self.b)
        if not np.all(np.isfinite(a)) or not np.isfinite(b):
            raise ValueError(f"Hyperplane coefficients must be finite (a={a.tolist()}, b={b})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __call__(self, x) -> float:
        return float(np.dot(self.a, np.asarray(x, dtype=float)) + self.b)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.a + self.b

    @classmethod
    def constant(cls, n: int, value: float) -> "Hyperplane":
        return cls(np.zeros(n), value)

    def shifted(self, delta: float) -> "Hyperplane":
        """Same slope, offset moved by delta."""
        return Hyperplane(self.a.copy(), self.b + delta)

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b}


class PwaValue:
    """
    Pointwise minimum of a finite list of hyperplanes.

    Dominated cuts are kept so that cut indices stay stable across a run;
    `compact()` is the only way to drop them.
    """

    _INITIAL_CAPACITY = 4

    def __init__(self, n: int, cuts: Optional[Sequence[Hyperplane]] = None):
        if n < 1:
            raise ValueError(f"Dimension must be >= 1, got {n}")
        self.n = n
        self._a = np.empty((self._INITIAL_CAPACITY, n))
        self._b = np.empty(self._INITIAL_CAPACITY)
        self._iters: list[int] = []
        self._size = 0
        self._frozen = False
        for cut in cuts or ():
            self.add_cut(cut)

    def __len__(self) -> int:
        return self._size

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def slopes(self) -> np.ndarray:
        return self._a[: self._size]

    @property
    def offsets(self) -> np.ndarray:
        return self._b[: self._size]

    @property
    def iterations(self) -> list[int]:
        """Training iteration that produced each cut (0 for the initializer)."""
        return list(self._iters)

    def freeze(self) -> None:
        self._frozen = True

    def cut(self, j: int) -> Hyperplane:
        if not 0 <= j < self._size:
            raise IndexError(f"Cut index {j} out of range (have {self._size})")
        return Hyperplane(self._a[j].copy(), self._b[j])

    def cuts(self) -> list[Hyperplane]:
        return [self.cut(j) for j in range(self._size)]

    def add_cut(self, cut: Hyperplane, iteration: int = 0) -> "PwaValue":
        """Append a cut; the function can only decrease pointwise."""
        if self._frozen:
            raise RuntimeError("Cannot add cuts to a frozen value function")
        if cut.n != self.n:
            raise ValueError(f"Cut dimension {cut.n} does not match value dimension {self.n}")
        if self._size == self._a.shape[0]:
            capacity = max(2 * self._a.shape[0], self._INITIAL_CAPACITY)
            self._a = np.resize(self._a, (capacity, self.n))
            self._b = np.resize(self._b, capacity)
        self._a[self._size] = cut.a
        self._b[self._size] = cut.b
        self._iters.append(int(iteration))
        self._size += 1
        return self

    def _require_cuts(self) -> None:
        if self._size == 0:
            raise ValueError("Cannot evaluate a value function with no cuts")

    def cut_values(self, x) -> np.ndarray:
        """Value of every cut at x."""
        self._require_cuts()
        return self.slopes @ np.asarray(x, dtype=float) + self.offsets

    def evaluate(self, x) -> float:
        return float(np.min(self.cut_values(x)))

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        self._require_cuts()
        values = np.asarray(points, dtype=float) @ self.slopes.T + self.offsets
        return values.min(axis=1)

    def supporting_indices(self, x, tie_tol: Optional[float] = None) -> list[int]:
        """Indices (0-based) of cuts attaining the minimum at x within tie_tol."""
        values = self.cut_values(x)
        best = float(values.min())
        if tie_tol is None:
            tie_tol = TIE_TOL_FACTOR * (1.0 + abs(best))
        return [int(j) for j in np.flatnonzero(values <= best + tie_tol)]

    def prefix(self, count: int) -> "PwaValue":
        """Frozen copy holding only the first `count` cuts."""
        view = PwaValue(self.n)
        view._a = self._a[:count].copy()
        view._b = self._b[:count].copy()
        view._iters = self._iters[:count]
        view._size = min(count, self._size)
        view._frozen = True
        return view

    def copy(self) -> "PwaValue":
        clone = self.prefix(self._size)
        clone._frozen = self._frozen
        return clone

    def compact(self, points: np.ndarray) -> int:
        """
        Drop cuts that support the minimum at none of the given points.

        Returns the number of cuts removed.
        """
        if self._frozen:
            raise RuntimeError("Cannot compact a frozen value function")
        self._require_cuts()
        values = np.asarray(points, dtype=float) @ self.slopes.T + self.offsets
        best = values.min(axis=1, keepdims=True)
        tol = TIE_TOL_FACTOR * (1.0 + np.abs(best))
        keep = np.any(values <= best + tol, axis=0)
        removed = int(self._size - keep.sum())
        if removed:
            logger.debug(f"Compacting value function: dropping {removed} of {self._size} cuts")
            self._a = self.slopes[keep].copy()
            self._b = self.offsets[keep].copy()
            self._iters = [it for it, k in zip(self._iters, keep) if k]
            self._size = int(keep.sum())
        return removed


class _TerminalFunction:
    """Exact terminal value -C(x), never approximated."""

    def __init__(self, func: Callable):
        self._func = func

    def __call__(self, x) -> float:
        return float(self._func(np.asarray(x)))

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.array([self._func(p) for p in np.asarray(points)], dtype=float)


@dataclass
class ValueStack:
    """Per-time-step approximations Q_1..Q_t_bar plus the exact terminal function."""

    t_bar: int
    n: int
    terminal: Callable
    per_t: list[PwaValue] = field(default_factory=list)

    def __post_init__(self):
        if self.t_bar < 1:
            raise ValueError(f"t_bar must be >= 1, got {self.t_bar}")
        if not self.per_t:
            self.per_t = [PwaValue(self.n) for _ in range(self.t_bar)]
        if len(self.per_t) != self.t_bar:
            raise ValueError(f"Expected {self.t_bar} value functions, got {len(self.per_t)}")
        if not isinstance(self.terminal, _TerminalFunction):
            self.terminal = _TerminalFunction(self.terminal)

    @classmethod
    def initialized(cls, t_bar: int, n: int, terminal: Callable,
                    initial: Hyperplane) -> "ValueStack":
        stack = cls(t_bar=t_bar, n=n, terminal=terminal)
        for q in stack.per_t:
            q.add_cut(initial, iteration=0)
        return stack

    @property
    def frozen(self) -> bool:
        return all(q.frozen for q in self.per_t)

    def freeze(self) -> None:
        for q in self.per_t:
            q.freeze()

    def q(self, t: int) -> PwaValue:
        if not 1 <= t <= self.t_bar:
            raise IndexError(f"Time step {t} outside 1..{self.t_bar}")
        return self.per_t[t - 1]

    def continuation(self, t: int) -> Callable:
        """Value function used at time t; t_bar + 1 is the exact terminal."""
        if t == self.t_bar + 1:
            return self.terminal
        return self.q(t)

    def evaluate(self, t: int, x) -> float:
        return float(self.continuation(t)(np.asarray(x)))

    def cut_count(self) -> int:
        return sum(len(q) for q in self.per_t)

    def snapshot(self) -> "ValueStack":
        """Frozen deep copy, safe to keep while training continues."""
        return ValueStack(
            t_bar=self.t_bar,
            n=self.n,
            terminal=self.terminal,
            per_t=[q.prefix(len(q)) for q in self.per_t],
        )


def fit_hyperplane(anchor, values) -> Hyperplane:
    """
    Unique hyperplane through (anchor, values[0]) and (anchor + e_s, values[s]).

    `values` follows the successor order: stay first, then s = 1..n.
    """
    anchor = np.asarray(anchor, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (anchor.shape[0] + 1,):
        raise ValueError(
            f"Need {anchor.shape[0] + 1} interpolation values, got {values.shape[0]}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError(f"Interpolation values must be finite: {values.tolist()}")
    a = values[1:] - values[0]
    b = values[0] - float(np.dot(a, anchor))
    return Hyperplane(a, b)


@dataclass
class SubmodularityReport:
    """Outcome of a pairwise submodularity scan."""

    submodular: bool
    worst_violation: float = 0.0
    worst_pair: Optional[tuple[tuple[int, ...], tuple[int, ...]]] = None
    tolerance: float = 0.0

    def __bool__(self) -> bool:
        return bool(self.submodular)


def _unique_points(points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.int64))
    return np.unique(points, axis=0)


def _pair_report(values: np.ndarray, idx_y, idx_z, idx_max, idx_min,
                 y: np.ndarray, z: np.ndarray, sub_tol: Optional[float]) -> SubmodularityReport:
    violation = values[idx_max] + values[idx_min] - values[idx_y] - values[idx_z]
    if sub_tol is None:
        sub_tol = SUB_TOL_FACTOR * (1.0 + float(np.max(np.abs(values))))
    worst = int(np.argmax(violation))
    return SubmodularityReport(
        submodular=bool(violation[worst] <= sub_tol),
        worst_violation=float(max(violation[worst], 0.0)),
        worst_pair=(tuple(int(v) for v in y[worst]), tuple(int(v) for v in z[worst])),
        tolerance=float(sub_tol),
    )


def is_submodular_on(f: Callable, points, sub_tol: Optional[float] = None) -> SubmodularityReport:
    """
    Check f(max(y,z)) + f(min(y,z)) <= f(y) + f(z) for every unordered pair of points.

    f must be total on the integer lattice (max/min of a pair may leave the set).
    """
    pts = _unique_points(points)
    m = pts.shape[0]
    if m < 2:
        return SubmodularityReport(submodular=True)

    i_idx, j_idx = np.triu_indices(m, k=1)
    y, z = pts[i_idx], pts[j_idx]
    k = i_idx.shape[0]
    values = evaluate_points(f, np.vstack([pts, np.maximum(y, z), np.minimum(y, z)]))
    return _pair_report(
        values, i_idx, j_idx, np.arange(m, m + k), np.arange(m + k, m + 2 * k),
        y, z, sub_tol,
    )


@lru_cache(maxsize=None)
def local_offsets(n: int) -> np.ndarray:
    """Offsets e_s + e_s' for s <= s' in {0, 1..n} (e_0 = 0), zero offset first."""
    steps = np.vstack([np.zeros(n, dtype=np.int64), np.eye(n, dtype=np.int64)])
    offsets = [steps[i] + steps[j] for i in range(n + 1) for j in range(i, n + 1)]
    out = np.array(offsets, dtype=np.int64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _local_pair_layout(n: int):
    # max/min commute with translation, so the pair geometry depends on n only
    offsets = local_offsets(n)
    m = offsets.shape[0]
    i_idx, j_idx = np.triu_indices(m, k=1)
    k = i_idx.shape[0]
    stacked = np.vstack([
        offsets,
        np.maximum(offsets[i_idx], offsets[j_idx]),
        np.minimum(offsets[i_idx], offsets[j_idx]),
    ])
    unique, inverse = np.unique(stacked, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return (
        unique,
        inverse[:m][i_idx],
        inverse[:m][j_idx],
        inverse[m:m + k],
        inverse[m + k:],
        offsets[i_idx],
        offsets[j_idx],
    )


def is_submodular_near(f: Callable, x, sub_tol: Optional[float] = None) -> SubmodularityReport:
    """Pairwise submodularity check on the local set {x + e_s + e_s'}."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    unique, idx_y, idx_z, idx_max, idx_min, off_y, off_z = _local_pair_layout(x.shape[0])
    values = evaluate_points(f, x + unique)
    return _pair_report(values, idx_y, idx_z, idx_max, idx_min, x + off_y, x + off_z, sub_tol)


def lattice_box(upper) -> np.ndarray:
    """All integer points 0 <= x <= upper in lexicographic (row-major) order."""
    upper = [int(u) for u in upper]
    return np.array(list(itertools.product(*(range(u + 1) for u in upper))), dtype=np.int64)
