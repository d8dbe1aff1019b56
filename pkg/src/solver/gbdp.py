"""
Training loop: forward sweeps for sample profits, backward sweeps for cuts.

Each iteration simulates one booking horizon under the greedy policy of the
current approximation (a stochastic lower bound l), then walks the path
backwards adding one cut per time step. Q_1(0) after the backward sweep is
the deterministic upper bound u.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from src.engine.bellman import CutCase, backward_cut
from src.problems.base import Decision, ProblemDefinition, successors
from src.values.pwa import ValueStack, evaluate_points

logger = logging.getLogger(__name__)

# RNG stream ids, combined with the root seed and a counter
STREAM_TRAIN = 0
STREAM_SIMULATE = 1

CONVERGED_TOL = 1e-8


class ResampleMode(Enum):
    OFF = "off"
    ORACLE_ASSISTED = "oracle_assisted"


class CutAnchor(Enum):
    NEXT = "next"
    CURRENT = "current"


@dataclass
class SolverConfig:
    """Training parameters (the `solver` config block)."""

    i_max: int = 100
    seed: int = 0
    resample_mode: ResampleMode = ResampleMode.OFF
    eps_opt: Optional[float] = None  # None: use the problem's declared tolerance
    cut_anchor: CutAnchor = CutAnchor.NEXT
    stale_continuation: bool = False
    tie_tol: Optional[float] = None
    sub_tol: Optional[float] = None
    compact_cuts: bool = False
    log_every: int = 10

    def __post_init__(self):
        self.resample_mode = ResampleMode(self.resample_mode)
        self.cut_anchor = CutAnchor(self.cut_anchor)
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if self.eps_opt is not None and self.eps_opt < 0:
            raise ValueError(f"eps_opt must be >= 0, got {self.eps_opt}")
        if self.log_every < 1:
            raise ValueError(f"log_every must be >= 1, got {self.log_every}")

    @classmethod
    def from_dict(cls, config: dict) -> "SolverConfig":
        """Create SolverConfig from a dictionary (`solver` config section)."""
        solver = config.get("solver", {})
        eps_opt = solver.get("eps_opt")
        tie_tol = solver.get("tie_tol")
        sub_tol = solver.get("sub_tol")
        return cls(
            i_max=int(solver.get("i_max", 100)),
            seed=int(solver.get("seed", 0)),
            resample_mode=solver.get("resample_mode", "off"),
            eps_opt=None if eps_opt is None else float(eps_opt),
            cut_anchor=solver.get("cut_anchor", "next"),
            stale_continuation=bool(solver.get("stale_continuation", False)),
            tie_tol=None if tie_tol is None else float(tie_tol),
            sub_tol=None if sub_tol is None else float(sub_tol),
            compact_cuts=bool(solver.get("compact_cuts", False)),
            log_every=int(solver.get("log_every", 10)),
        )

    def resolved_eps(self, problem: ProblemDefinition) -> float:
        return problem.default_eps_opt() if self.eps_opt is None else self.eps_opt


@dataclass
class SamplePath:
    """States x_1..x_{t_bar+1}, decisions and sampled branches of one sweep."""

    states: np.ndarray
    decisions: list[Decision] = field(default_factory=list)
    branches: list[int] = field(default_factory=list)
    revenues: list[float] = field(default_factory=list)

    def state(self, t: int) -> np.ndarray:
        """x_t, 1-based."""
        return self.states[t - 1]


@dataclass
class IterationRecord:
    iter: int
    lower_sample: float
    upper_bound: float
    cum_avg_lower: float
    case1_count: int = 0
    case2_count: int = 0
    resample_count: int = 0
    wall_ms: float = 0.0


@dataclass
class BoundsTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.upper_bound > self.records[-1].upper_bound:
            logger.warning(
                f"Upper bound increased at iteration {record.iter}: "
                f"{self.records[-1].upper_bound!r} -> {record.upper_bound!r}"
            )
        self.records.append(record)

    @property
    def lower_samples(self) -> list[float]:
        return [r.lower_sample for r in self.records]

    @property
    def upper_bounds(self) -> list[float]:
        return [r.upper_bound for r in self.records]

    @property
    def final(self) -> Optional[IterationRecord]:
        return self.records[-1] if self.records else None


@dataclass
class SweepStats:
    case1: int = 0
    case2: int = 0


def derive_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for (root seed, stream, counter)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, index)))


def sample_branch(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over the successor order; zero-probability branches are never hit."""
    cdf = np.cumsum(probs)
    branch = int(np.searchsorted(cdf, u, side="right"))
    if branch >= probs.shape[0]:
        # u landed in the rounding gap above cdf[-1]
        branch = int(np.flatnonzero(probs > 0)[-1])
    return branch


def resample_if_converged(problem: ProblemDefinition, stack, exact_table, x_prev, x_next,
                          t: int, rng: np.random.Generator) -> np.ndarray:
    """
    Redirect a path away from states where Q_t already equals V_t.

    x_prev is x_t and x_next the sampled x_{t+1}, the anchor of the next cut
    for Q_t. When Q_t(x_next) matches V_t(x_next), a successor of x_prev
    inside the box with Q_t > V_t is drawn uniformly; if there is none,
    x_next is kept.
    """
    q = stack.q(t)
    if abs(float(q(x_next)) - exact_table.value(t, x_next)) > CONVERGED_TOL:
        return x_next
    candidates = [
        y for y in successors(x_prev, problem.space)
        if problem.space.contains(y) and float(q(y)) > exact_table.value(t, y) + CONVERGED_TOL
    ]
    if not candidates:
        return x_next
    return candidates[int(rng.integers(len(candidates)))]


def forward_sweep(problem: ProblemDefinition, stack, rng: np.random.Generator,
                  exact_table=None) -> tuple[SamplePath, float, int]:
    """
    Simulate one horizon under the greedy policy of the stack.

    Returns the path, the sample profit l and the number of resampled steps
    (always 0 unless an exact table is supplied).
    """
    space = problem.space
    x = np.zeros(space.n, dtype=np.int64)
    path = SamplePath(states=np.empty((problem.t_bar + 1, space.n), dtype=np.int64))
    path.states[0] = x
    profit = 0.0
    resampled = 0

    for t in problem.horizon.steps():
        points = successors(x, space)
        continuation = evaluate_points(stack.continuation(t + 1), points)
        decision, _ = problem.best_decision(x, continuation)
        probs = problem.transition(x, decision).probs
        branch = sample_branch(probs, rng.random())

        if exact_table is not None:
            y = resample_if_converged(problem, stack, exact_table, x, points[branch], t, rng)
            moved = int(np.sum(y - x))
            new_branch = 0 if moved == 0 else int(np.argmax(y - x)) + 1
            if new_branch != branch:
                resampled += 1
                branch = new_branch

        y = points[branch]
        # A resampled move the policy gave no probability earns nothing
        revenue = problem.stage_revenue(x, y, decision) if probs[branch] > 0 else 0.0
        profit += revenue
        path.decisions.append(decision)
        path.branches.append(branch)
        path.revenues.append(revenue)
        path.states[t] = y
        x = y

    profit -= problem.terminal_cost(x)
    return path, profit, resampled


def backward_sweep(problem: ProblemDefinition, stack: ValueStack, path: SamplePath,
                   config: SolverConfig, iteration: int = 0) -> SweepStats:
    """Add one cut to each Q_t, t = t_bar down to 1."""
    eps_opt = config.resolved_eps(problem)
    counts = [len(q) for q in stack.per_t]
    stats = SweepStats()

    for t in range(problem.t_bar, 0, -1):
        if config.cut_anchor is CutAnchor.NEXT:
            x_ref = path.state(t + 1)
        else:
            x_ref = path.state(t)

        if config.stale_continuation and t < problem.t_bar:
            q_next = stack.q(t + 1).prefix(counts[t])
        else:
            q_next = stack.continuation(t + 1)

        result = backward_cut(problem, q_next, x_ref, eps_opt, config.tie_tol, config.sub_tol)
        stack.q(t).add_cut(result.hyperplane, iteration=iteration)
        if result.case is CutCase.CASE_I:
            stats.case1 += 1
        else:
            stats.case2 += 1

    return stats


def initial_stack(problem: ProblemDefinition) -> ValueStack:
    """Q_t^0 from the problem's affine upper bound, exact terminal at t_bar + 1."""
    return ValueStack.initialized(
        t_bar=problem.t_bar,
        n=problem.n,
        terminal=problem.terminal_value,
        initial=problem.initial_upper_bound(),
    )


def train(
    problem: ProblemDefinition,
    config: SolverConfig,
    exact_table=None,
    on_iteration: Optional[Callable[[IterationRecord, ValueStack], None]] = None,
    stack: Optional[ValueStack] = None,
) -> tuple[ValueStack, BoundsTrace]:
    """
    Run i_max training iterations.

    `on_iteration` is called after every backward sweep with the new record
    and the live stack; callers stream traces or take snapshots there.
    """
    if config.resample_mode is ResampleMode.ORACLE_ASSISTED and exact_table is None:
        raise ValueError("Oracle-assisted resampling needs an exact value table")
    resample_table = exact_table if config.resample_mode is ResampleMode.ORACLE_ASSISTED else None

    stack = stack or initial_stack(problem)
    trace = BoundsTrace()
    origin = np.zeros(problem.n, dtype=np.int64)
    states = problem.space.states() if config.compact_cuts else None
    lower_total = 0.0

    logger.info(
        f"Training: i_max={config.i_max}, seed={config.seed}, "
        f"eps_opt={config.resolved_eps(problem):.3g}, anchor={config.cut_anchor.value}, "
        f"resample={config.resample_mode.value}"
    )

    for i in range(1, config.i_max + 1):
        started = time.perf_counter()
        rng = derive_rng(config.seed, STREAM_TRAIN, i)
        path, lower, resampled = forward_sweep(problem, stack, rng, resample_table)
        stats = backward_sweep(problem, stack, path, config, iteration=i)

        if states is not None:
            removed = sum(q.compact(states) for q in stack.per_t)
            if removed:
                logger.debug(f"Iteration {i}: compacted {removed} cuts")

        upper = stack.q(1).evaluate(origin)
        if not math.isfinite(lower) or not math.isfinite(upper):
            raise RuntimeError(f"Non-finite bound at iteration {i}: l={lower}, u={upper}")

        lower_total += lower
        if resampled:
            logger.debug(f"[RESAMPLE] Iteration {i}: {resampled} steps redirected")
        record = IterationRecord(
            iter=i,
            lower_sample=lower,
            upper_bound=upper,
            cum_avg_lower=lower_total / i,
            case1_count=stats.case1,
            case2_count=stats.case2,
            resample_count=resampled,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        trace.append(record)
        if on_iteration is not None:
            on_iteration(record, stack)

        if i % config.log_every == 0 or i == config.i_max:
            logger.info(
                f"Iteration {i}/{config.i_max}: l={lower:.4f}, u={upper:.4f}, "
                f"avg_l={record.cum_avg_lower:.4f}, case2={stats.case2}"
            )

    return stack, trace
