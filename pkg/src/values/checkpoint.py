"""
JSON-lines checkpoint codec for value stacks.

One record per cut: {"t": ..., "iter": ..., "a": [...], "b": ...}. Floats
go through repr, which round-trips doubles exactly.
"""

import json
import logging
from pathlib import Path
from typing import Callable

import numpy as np

from .pwa import Hyperplane, PwaValue, ValueStack

logger = logging.getLogger(__name__)


class CheckpointError(Exception):
    """Raised when a checkpoint cannot be read or does not fit the problem."""

    def __init__(self, message: str, code: str = "CHECKPOINT_INVALID"):
        super().__init__(message)
        self.code = code


def save_checkpoint(stack: ValueStack, path: Path) -> int:
    """Write every cut of Q_1..Q_t_bar; returns the number of records."""
    count = 0
    with open(path, "w") as f:
        for t in range(1, stack.t_bar + 1):
            q = stack.q(t)
            for j, iteration in enumerate(q.iterations):
                cut = q.cut(j)
                record = {"t": t, "iter": iteration, "a": cut.a.tolist(), "b": cut.b}
                f.write(json.dumps(record) + "\n")
                count += 1
    logger.info(f"[CHECKPOINT] Wrote {count} cuts to {path}")
    return count


def load_checkpoint(path: Path, t_bar: int, n: int, terminal: Callable) -> ValueStack:
    """
    Rebuild a frozen stack; every t in 1..t_bar must have at least one cut.

    Raises CheckpointError on malformed records or a dimension mismatch.
    """
    per_t = [PwaValue(n) for _ in range(t_bar)]
    try:
        with open(path) as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                t = int(record["t"])
                a = np.asarray(record["a"], dtype=float)
                if not 1 <= t <= t_bar:
                    raise CheckpointError(
                        f"Line {line_no}: t={t} outside 1..{t_bar}", code="CHECKPOINT_MISMATCH"
                    )
                if a.shape != (n,):
                    raise CheckpointError(
                        f"Line {line_no}: cut has dimension {a.shape}, expected {n}",
                        code="CHECKPOINT_MISMATCH",
                    )
                per_t[t - 1].add_cut(Hyperplane(a, float(record["b"])), int(record.get("iter", 0)))
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}", code="CHECKPOINT_MISSING")
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Malformed checkpoint {path}: {e}")

    empty = [t for t, q in enumerate(per_t, start=1) if len(q) == 0]
    if empty:
        raise CheckpointError(
            f"Checkpoint has no cuts for t={empty[:5]}{'...' if len(empty) > 5 else ''}",
            code="CHECKPOINT_MISMATCH",
        )

    stack = ValueStack(t_bar=t_bar, n=n, terminal=terminal, per_t=per_t)
    stack.freeze()
    logger.info(f"[CHECKPOINT] Loaded {stack.cut_count()} cuts from {path}")
    return stack
