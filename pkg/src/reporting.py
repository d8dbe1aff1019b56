"""
Run artifacts: trace, summary, profits and histogram files.

Floats are written with 17 significant digits so every value read back is
the double that was written.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from src.solver.gbdp import IterationRecord

logger = logging.getLogger(__name__)

TRACE_HEADER = ["iter", "lower_sample", "upper_bound", "cum_avg_lower", "case1", "case2", "wall_ms"]
HISTOGRAM_HEADER = ["bin_left", "bin_right", "count"]
HISTOGRAM_BINS = 30


def fmt(value: float) -> str:
    return format(float(value), ".17g")


class TraceWriter:
    """
    Streams one CSV row per training iteration, flushing as it goes.

    Rows written before a failure stay on disk. With timing disabled the
    wall_ms column is 0, which makes traces byte-identical across runs.
    """

    def __init__(self, path: Path, timing: bool = True):
        self.path = Path(path)
        self.timing = timing
        self.rows = 0
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(TRACE_HEADER)
        self._file.flush()

    def write(self, record: IterationRecord) -> None:
        self._writer.writerow([
            record.iter,
            fmt(record.lower_sample),
            fmt(record.upper_bound),
            fmt(record.cum_avg_lower),
            record.case1_count,
            record.case2_count,
            fmt(record.wall_ms if self.timing else 0.0),
        ])
        self._file.flush()
        self.rows += 1

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()
        if exc_type is not None:
            logger.warning(f"Trace {self.path} closed early after {self.rows} rows")


def read_trace(path: Path) -> list[dict]:
    """Trace rows with numeric fields parsed."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [
            {
                "iter": int(row["iter"]),
                "lower_sample": float(row["lower_sample"]),
                "upper_bound": float(row["upper_bound"]),
                "cum_avg_lower": float(row["cum_avg_lower"]),
                "case1": int(row["case1"]),
                "case2": int(row["case2"]),
                "wall_ms": float(row["wall_ms"]),
            }
            for row in reader
        ]


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def update_summary(path: Path, payload: dict) -> dict:
    """Merge payload into an existing summary.json (or start a new one)."""
    path = Path(path)
    summary = {}
    if path.exists():
        with open(path) as f:
            summary = json.load(f)
    summary.update(payload)
    write_json(path, summary)
    return summary


def write_profits(path: Path, profits: list[float]) -> None:
    """One profit per line, no header."""
    with open(path, "w") as f:
        for profit in profits:
            f.write(fmt(profit) + "\n")


def read_profits(path: Path) -> list[float]:
    with open(path) as f:
        return [float(line) for line in f if line.strip()]


def histogram(profits: list[float], bins: int = HISTOGRAM_BINS) -> list[tuple[float, float, int]]:
    """Equal-width bins between the smallest and largest profit."""
    if not profits:
        return []
    counts, edges = np.histogram(np.asarray(profits, dtype=float), bins=bins)
    return [(float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(bins)]


def write_histogram(path: Path, profits: list[float], bins: int = HISTOGRAM_BINS) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HISTOGRAM_HEADER)
        for left, right, count in histogram(profits, bins):
            writer.writerow([fmt(left), fmt(right), count])


def profit_stats(profits: list[float]) -> dict[str, Optional[float]]:
    """Mean and sample standard deviation (None when undefined)."""
    if not profits:
        return {"mean_l": None, "sd_l": None}
    values = np.asarray(profits, dtype=float)
    return {
        "mean_l": float(values.mean()),
        "sd_l": float(values.std(ddof=1)) if values.shape[0] > 1 else 0.0,
    }
