"""
Monte-Carlo evaluation of a frozen value stack.

Each replication is a forward sweep with its own RNG stream derived from
(seed, replication index); no cuts are added.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from src.problems.base import ProblemDefinition
from src.workers import map_ordered, run_ordered

from .gbdp import STREAM_SIMULATE, derive_rng, forward_sweep

logger = logging.getLogger(__name__)


def _check_frozen(stack) -> None:
    if not getattr(stack, "frozen", False):
        raise ValueError("Simulation needs a frozen value stack")


def _replication(problem: ProblemDefinition, stack, seed: int):
    def run(index: int) -> float:
        _, profit, _ = forward_sweep(problem, stack, derive_rng(seed, STREAM_SIMULATE, index))
        return profit
    return run


def simulate(problem: ProblemDefinition, stack, replications: int, seed: int = 0,
             max_workers: Optional[int] = None) -> list[float]:
    """Sample profits of `replications` independent booking horizons, in index order."""
    _check_frozen(stack)
    if replications < 0:
        raise ValueError(f"replications must be >= 0, got {replications}")
    profits = run_ordered(_replication(problem, stack, seed), range(replications), max_workers)
    logger.info(f"Simulated {replications} replications")
    return profits


async def simulate_async(problem: ProblemDefinition, stack, replications: int, seed: int = 0,
                         max_workers: Optional[int] = None) -> list[float]:
    """Same as simulate, for callers already inside an event loop."""
    _check_frozen(stack)
    return await map_ordered(
        _replication(problem, stack, seed), list(range(replications)), max_workers
    )


@dataclass
class ProfitSummary:
    """Mean, spread and an optional one-sided t-test of the simulated profits."""

    n: int
    mean: float
    sd: float
    se: float
    reference: Optional[float] = None
    t_statistic: Optional[float] = None
    p_value: Optional[float] = None

    @classmethod
    def from_profits(cls, profits: list[float],
                     reference: Optional[float] = None) -> "ProfitSummary":
        """
        Summarise profits; with a reference value, test H0: E[l] <= reference.

        A small p-value is evidence that the mean profit exceeds the reference.
        """
        values = np.asarray(profits, dtype=float)
        n = values.shape[0]
        if n == 0:
            return cls(n=0, mean=math.nan, sd=math.nan, se=math.nan, reference=reference)
        mean = float(values.mean())
        sd = float(values.std(ddof=1)) if n > 1 else 0.0
        se = sd / math.sqrt(n)
        summary = cls(n=n, mean=mean, sd=sd, se=se, reference=reference)
        if reference is not None and n > 1 and sd > 0:
            result = stats.ttest_1samp(values, reference, alternative="greater")
            summary.t_statistic = float(result.statistic)
            summary.p_value = float(result.pvalue)
        return summary

    def rejects_upper_reference(self, alpha: float = 0.01) -> bool:
        """True when the test rejects E[l] <= reference at level alpha."""
        return self.p_value is not None and self.p_value < alpha

    def within(self, value: float, k: float = 3.0) -> bool:
        """|mean - value| <= k standard errors."""
        return abs(self.mean - value) <= k * self.se

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "se": self.se,
            "reference": self.reference,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
        }
