"""
Attended home delivery slot pricing.

Customers arrive with probability lambda per booking epoch and pick a
delivery slot (or leave) under a multinomial-logit model with weights
exp(beta_c + beta_s + beta_d * d_s). A slot with no remaining capacity is
closed (infinite price). Delivery cost is affine in the number of orders
and settled once at the end of the booking horizon.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .base import (
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

# Structural price search
THETA_SCAN_POINTS = 33
THETA_XATOL = 1e-10
REFINEMENT_ROUNDS = 2
KKT_TOL = 1e-9

# Brute-force oracle limits
DEFAULT_GRID_STEP = 0.01
MAX_GRID_COMBINATIONS = 5_000_000

PRICE_ORACLES = ("structural", "grid")


@dataclass(frozen=True)
class MnlParams:
    """Multinomial-logit booking model and cost parameters."""

    lam: float
    beta_c: float
    beta_s: tuple[float, ...]
    beta_d: float
    r: float
    d_lo: float
    d_hi: float
    c_unit: float
    x_bar: tuple[int, ...]
    t_bar: int
    beta_source: str = "synthetic"
    price_oracle: str = "structural"
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        object.__setattr__(self, "beta_s", tuple(float(b) for b in self.beta_s))
        object.__setattr__(self, "x_bar", tuple(int(v) for v in self.x_bar))
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.beta_d < 0.0:
            raise ValueError(f"beta_d must be negative, got {self.beta_d}")
        if self.d_lo > self.d_hi:
            raise ValueError(f"Price box is empty: [{self.d_lo}, {self.d_hi}]")
        if len(self.beta_s) != len(self.x_bar):
            raise ValueError(
                f"beta_s has {len(self.beta_s)} entries but x_bar has {len(self.x_bar)}"
            )
        if self.price_oracle not in PRICE_ORACLES:
            raise ValueError(f"Unknown price oracle '{self.price_oracle}'")
        if self.grid_step <= 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step}")

    @property
    def n(self) -> int:
        return len(self.x_bar)

    @property
    def utility_offsets(self) -> np.ndarray:
        """beta_c + beta_s per slot."""
        return self.beta_c + np.asarray(self.beta_s)

    @classmethod
    def from_dict(cls, config: dict) -> "MnlParams":
        """
        Create MnlParams from the `problem` config block.

        `beta_s` may be a single number, applied to every slot.
        """
        x_bar = list(config["x_bar"])
        beta_s = config.get("beta_s", 0.0)
        if not isinstance(beta_s, (list, tuple)):
            beta_s = [beta_s] * len(x_bar)
        return cls(
            lam=float(config["lambda"]),
            beta_c=float(config.get("beta_c", 0.0)),
            beta_s=tuple(beta_s),
            beta_d=float(config["beta_d"]),
            r=float(config["r"]),
            d_lo=float(config.get("d_lo", 0.0)),
            d_hi=float(config.get("d_hi", 10.0)),
            c_unit=float(config.get("c_unit", 0.0)),
            x_bar=tuple(x_bar),
            t_bar=int(config["t_bar"]),
            beta_source=config.get("beta_source", "synthetic"),
            price_oracle=config.get("price_oracle", "structural"),
            grid_step=float(config.get("grid_step", DEFAULT_GRID_STEP)),
        )

    def to_dict(self) -> dict:
        return {
            "type": "ahd",
            "lambda": self.lam,
            "beta_c": self.beta_c,
            "beta_s": list(self.beta_s),
            "beta_d": self.beta_d,
            "r": self.r,
            "d_lo": self.d_lo,
            "d_hi": self.d_hi,
            "c_unit": self.c_unit,
            "x_bar": list(self.x_bar),
            "t_bar": self.t_bar,
            "beta_source": self.beta_source,
            "price_oracle": self.price_oracle,
            "grid_step": self.grid_step,
        }


def available_slots(params: MnlParams, x) -> np.ndarray:
    """Slots with spare capacity; everything else is forced closed."""
    return as_state(x) < np.asarray(params.x_bar)


def _weights(params: MnlParams, x, d: Decision) -> np.ndarray:
    if len(d.controls) != params.n:
        raise ValueError(f"Decision has {len(d.controls)} prices, expected {params.n}")
    open_mask = available_slots(params, x)
    weights = np.zeros(params.n)
    offsets = params.utility_offsets
    for s, price in enumerate(d.controls):
        if price is None or not open_mask[s]:
            continue
        if not params.d_lo <= price <= params.d_hi:
            raise ValueError(
                f"Price {price} for slot {s} outside [{params.d_lo}, {params.d_hi}]"
            )
        weights[s] = math.exp(offsets[s] + params.beta_d * price)
    return weights


def choice_probs(params: MnlParams, x, d: Decision) -> TransitionDistribution:
    """Stay probability first, then one purchase probability per slot."""
    weights = _weights(params, x, d)
    purchase = params.lam * weights / (1.0 + weights.sum())
    return TransitionDistribution(np.concatenate(([1.0 - purchase.sum()], purchase)))


def stage_revenue(params: MnlParams, x, y, d: Decision) -> float:
    """r + d_s on a purchase of slot s, 0 when nobody books."""
    step = as_state(y) - as_state(x)
    if not np.any(step):
        return 0.0
    if step.sum() != 1 or np.any(step < 0):
        raise ValueError(f"{as_state(y).tolist()} is not a successor of {as_state(x).tolist()}")
    s = int(np.argmax(step))
    price = d.controls[s]
    if price is None:
        return math.inf
    return params.r + price


def terminal_cost(params: MnlParams, x) -> float:
    """Affine delivery cost on the box, +inf outside it."""
    x = as_state(x)
    if np.any(x < 0) or np.any(x > np.asarray(params.x_bar)):
        return math.inf
    return params.c_unit * float(x.sum())


def fixed_point_init(params: MnlParams) -> Hyperplane:
    """V*(x) = (d_hi + r) 1'(x_bar - x) - C(x_bar)."""
    margin = params.d_hi + params.r
    total = float(sum(params.x_bar))
    return Hyperplane(np.full(params.n, -margin), margin * total - params.c_unit * total)


def _markups(params: MnlParams, x, continuation) -> tuple[np.ndarray, np.ndarray, float]:
    continuation = np.asarray(continuation, dtype=float)
    if continuation.shape != (params.n + 1,):
        raise ValueError(
            f"Need {params.n + 1} continuation values, got {continuation.shape[0]}"
        )
    avail = available_slots(params, x)
    base = float(continuation[0])
    if not math.isfinite(base) or not np.all(np.isfinite(continuation[1:][avail])):
        raise DecisionOracleError(
            f"Continuation not finite at successors of {as_state(x).tolist()}",
            code="NON_FINITE_CONTINUATION",
        )
    u = np.where(avail, params.r + continuation[1:] - base, 0.0)
    return u, avail, base


def price_objective(params: MnlParams, x, continuation, d: Decision) -> float:
    """Expected one-step value of decision d against the given continuation."""
    u, avail, base = _markups(params, x, continuation)
    weights = _weights(params, x, d)
    prices = np.array([0.0 if p is None else p for p in d.controls])
    total = float(np.sum(weights * (u + prices)))
    return base + params.lam * total / (1.0 + weights.sum())


def _theta_profile(params: MnlParams, u: np.ndarray, avail: np.ndarray, thetas: np.ndarray):
    """Prices, open flags and mean markup for each candidate constant markup."""
    thetas = np.atleast_1d(thetas)[:, None]
    prices = np.clip(thetas - u, params.d_lo, params.d_hi)
    margins = u + prices
    is_open = avail & (margins > thetas + 1.0 / params.beta_d)
    weights = np.where(is_open, np.exp(params.utility_offsets + params.beta_d * prices), 0.0)
    value = np.sum(weights * margins, axis=1) / (1.0 + weights.sum(axis=1))
    return prices, is_open, value


def _best_response(params: MnlParams, u_s: float, offset_s: float,
                   others_num: float, others_den: float) -> tuple[Optional[float], float]:
    """
    Best price for one slot with the other slots held fixed.

    h(d) = B(1 + b m) + w - b A is strictly decreasing in d and has the sign
    of the derivative of (A + w m) / (B + w).
    """
    b = params.beta_d

    def h(price: float) -> float:
        w = math.exp(offset_s + b * price)
        return others_den * (1.0 + b * (u_s + price)) + w - b * others_num

    if h(params.d_lo) <= 0.0:
        price = params.d_lo
    elif h(params.d_hi) >= 0.0:
        price = params.d_hi
    else:
        price = brentq(h, params.d_lo, params.d_hi, xtol=1e-12)
    w = math.exp(offset_s + b * price)
    opened = (others_num + w * (u_s + price)) / (others_den + w)
    closed = others_num / others_den
    if opened > closed:
        return price, opened
    return None, closed


def _kkt_holds(params: MnlParams, u, avail, prices, is_open) -> bool:
    """True when no single slot can improve by changing its own price."""
    b = params.beta_d
    weights = np.where(is_open, np.exp(params.utility_offsets + b * prices), 0.0)
    margins = u + prices
    num = float(np.sum(weights * margins))
    den = 1.0 + float(weights.sum())
    others_num = num - weights * margins
    others_den = den - weights
    scale = others_den + abs(b) * (np.abs(others_num) + others_den * np.abs(margins))
    tol = KKT_TOL * scale
    slope = others_den * (1.0 + b * margins) + weights - b * others_num
    at_lo = prices <= params.d_lo
    at_hi = prices >= params.d_hi
    interior_ok = (at_lo & (slope <= tol)) | (at_hi & (slope >= -tol)) | (np.abs(slope) <= tol)
    open_ok = margins >= others_num / others_den - tol
    closed_ok = u + params.d_hi <= others_num / others_den + tol
    return bool(np.all(np.where(avail & is_open, interior_ok & open_ok, True))
                and np.all(np.where(avail & ~is_open, closed_ok, True)))


def optimal_prices(params: MnlParams, x, continuation) -> tuple[Decision, float]:
    """
    Maximise the one-step objective over prices in [d_lo, d_hi] or closed.

    At an optimum every interior open slot carries the same markup
    theta = r + d_s + Delta_s, slots priced at a bound sit on the matching
    side of theta, and a slot is open iff its markup beats the mean. The
    search scans theta, polishes the best bracket, then runs per-slot best
    responses for anything the clipping left off its first-order condition.
    """
    u, avail, base = _markups(params, x, continuation)
    if not np.any(avail):
        return Decision.all_closed(params.n), base

    lo = params.d_lo + float(u[avail].min())
    hi = params.d_hi + float(u[avail].max())
    grid = np.linspace(lo, hi, THETA_SCAN_POINTS)
    _, _, scan = _theta_profile(params, u, avail, grid)
    k = int(np.argmax(scan))
    theta, best = float(grid[k]), float(scan[k])

    left, right = grid[max(k - 1, 0)], grid[min(k + 1, THETA_SCAN_POINTS - 1)]
    if right > left:
        res = minimize_scalar(
            lambda th: -float(_theta_profile(params, u, avail, np.array([th]))[2][0]),
            bounds=(float(left), float(right)),
            method="bounded",
            options={"xatol": THETA_XATOL},
        )
        if -res.fun > best:
            theta, best = float(res.x), float(-res.fun)

    prices, is_open, _ = _theta_profile(params, u, avail, np.array([theta]))
    prices, is_open = prices[0].copy(), is_open[0].copy()

    if not _kkt_holds(params, u, avail, prices, is_open):
        offsets = params.utility_offsets
        for _ in range(REFINEMENT_ROUNDS):
            for s in np.flatnonzero(avail):
                weights = np.where(is_open, np.exp(offsets + params.beta_d * prices), 0.0)
                margins = u + prices
                others_num = float(np.sum(weights * margins) - weights[s] * margins[s])
                others_den = 1.0 + float(weights.sum() - weights[s])
                price, _ = _best_response(params, float(u[s]), float(offsets[s]),
                                          others_num, others_den)
                if price is None:
                    is_open[s] = False
                else:
                    is_open[s] = True
                    prices[s] = price

    weights = np.where(is_open, np.exp(params.utility_offsets + params.beta_d * prices), 0.0)
    value = float(np.sum(weights * (u + prices)) / (1.0 + weights.sum()))
    if value <= 0.0:
        return Decision.all_closed(params.n), base

    decision = Decision(tuple(float(p) if o else None for p, o in zip(prices, is_open)))
    return decision, base + params.lam * value


def grid_optimal_prices(params: MnlParams, x, continuation,
                        step: Optional[float] = None,
                        grid: Optional[Sequence[float]] = None) -> tuple[Decision, float]:
    """
    Brute-force maximum over a joint price grid plus the closed option per slot.

    Reference oracle for small n; refuses grids with too many combinations.
    """
    u, avail, base = _markups(params, x, continuation)
    if grid is None:
        step = step or params.grid_step
        grid = np.arange(params.d_lo, params.d_hi + step / 2, step)
        grid = np.clip(grid, params.d_lo, params.d_hi)
    grid = np.asarray(grid, dtype=float)

    options = [grid if avail[s] else np.empty(0) for s in range(params.n)]
    combos = math.prod(len(o) + 1 for o in options)
    if combos > MAX_GRID_COMBINATIONS:
        raise ValueError(
            f"Price grid has {combos} combinations (limit {MAX_GRID_COMBINATIONS})"
        )

    offsets = params.utility_offsets
    num = np.zeros(())
    den = np.ones(())
    for s, prices in enumerate(options):
        # Closed option first, at index 0
        w = np.concatenate(([0.0], np.exp(offsets[s] + params.beta_d * prices)))
        wm = np.concatenate(([0.0], w[1:] * (u[s] + prices)))
        shape = [1] * params.n
        shape[s] = w.shape[0]
        num = num + wm.reshape(shape)
        den = den + w.reshape(shape)
    values = num / den
    flat = int(np.argmax(values))
    index = np.unravel_index(flat, values.shape)
    controls = tuple(
        None if index[s] == 0 else float(options[s][index[s] - 1])
        for s in range(params.n)
    )
    return Decision(controls), base + params.lam * float(values.reshape(-1)[flat])


class AhdPricingProblem(ProblemDefinition):
    """Slot pricing under multinomial-logit choice with affine delivery cost."""

    def __init__(self, params: MnlParams):
        super().__init__(StateSpace(params.x_bar), HorizonSpec(params.t_bar))
        self.params = params
        if params.beta_source == "synthetic":
            logger.debug("Using synthetic choice-model coefficients")
        if params.price_oracle == "grid" and params.n > 3:
            raise ValueError(f"Grid price oracle supports n <= 3, got n={params.n}")

    @classmethod
    def from_config(cls, config: dict) -> "AhdPricingProblem":
        return cls(MnlParams.from_dict(config))

    def transition(self, x, d: Decision) -> TransitionDistribution:
        return choice_probs(self.params, x, d)

    def stage_revenue(self, x, y, d: Decision) -> float:
        return stage_revenue(self.params, x, y, d)

    def terminal_cost(self, x) -> float:
        return terminal_cost(self.params, x)

    def terminal_value(self, x) -> float:
        return -self.params.c_unit * float(as_state(x).sum())

    def best_decision(self, x, continuation: np.ndarray) -> tuple[Decision, float]:
        if self.params.price_oracle == "grid":
            return grid_optimal_prices(self.params, x, continuation)
        return optimal_prices(self.params, x, continuation)

    def initial_upper_bound(self) -> Hyperplane:
        p = self.params
        if p.r + p.d_hi >= p.c_unit:
            return fixed_point_init(p)
        # Selling never pays: the empty booking book is optimal everywhere
        logger.warning("c_unit exceeds r + d_hi; initialising with -C(x)")
        return Hyperplane(np.full(p.n, -p.c_unit), 0.0)

    def default_eps_opt(self) -> float:
        return 1e-6 * (self.params.r + self.params.d_hi)

    def describe(self) -> dict:
        info = super().describe()
        info.update(
            problem="ahd",
            lam=self.params.lam,
            beta_source=self.params.beta_source,
            price_oracle=self.params.price_oracle,
        )
        return info
