"""Tests for run artifacts and the worker pool."""

import time

import pytest

from src.reporting import (
    TRACE_HEADER,
    TraceWriter,
    histogram,
    profit_stats,
    read_profits,
    read_trace,
    update_summary,
    write_histogram,
    write_profits,
)
from src.solver.gbdp import IterationRecord
from src.workers import run_ordered, worker_count


def record(i: int, u: float = 10.0) -> IterationRecord:
    return IterationRecord(
        iter=i, lower_sample=1.5, upper_bound=u, cum_avg_lower=1.5,
        case1_count=3, case2_count=1, wall_ms=12.5,
    )


class TestTraceWriter:
    """Tests for the streaming trace CSV."""

    def test_header_and_rows(self, tmp_path):
        """The header is fixed and each record becomes one row."""
        path = tmp_path / "trace.csv"
        with TraceWriter(path) as writer:
            writer.write(record(1, 10.0))
            writer.write(record(2, 9.5))
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert len(lines) == 3
        rows = read_trace(path)
        assert [r["upper_bound"] for r in rows] == [10.0, 9.5]
        assert rows[0]["wall_ms"] == 12.5

    def test_timing_off(self, tmp_path):
        """With timing disabled wall_ms is written as 0."""
        path = tmp_path / "trace.csv"
        with TraceWriter(path, timing=False) as writer:
            writer.write(record(1))
        assert read_trace(path)[0]["wall_ms"] == 0.0

    def test_rows_survive_failure(self, tmp_path):
        """Rows written before an exception stay on disk."""
        path = tmp_path / "trace.csv"
        with pytest.raises(RuntimeError):
            with TraceWriter(path) as writer:
                writer.write(record(1))
                raise RuntimeError("boom")
        assert len(read_trace(path)) == 1

    def test_exact_doubles(self, tmp_path):
        """Values read back are the doubles written."""
        path = tmp_path / "trace.csv"
        value = 0.1 + 0.2
        with TraceWriter(path) as writer:
            writer.write(record(1, value))
        assert read_trace(path)[0]["upper_bound"] == value


class TestProfitFiles:
    """Tests for profits, histogram and summary files."""

    def test_profits_round_trip(self, tmp_path):
        """One profit per line, read back exactly."""
        path = tmp_path / "profits.csv"
        profits = [1.0 / 3.0, -2.5, 100.0]
        write_profits(path, profits)
        assert read_profits(path) == profits

    def test_empty_histogram(self, tmp_path):
        """No profits give a header-only histogram."""
        path = tmp_path / "histogram.csv"
        write_histogram(path, [])
        assert histogram([]) == []
        assert path.read_text().splitlines() == ["bin_left,bin_right,count"]

    def test_histogram_counts(self):
        """Bins cover the range and counts sum to the sample size."""
        bins = histogram([0.0, 1.0, 2.0, 3.0], bins=3)
        assert len(bins) == 3
        assert bins[0][0] == 0.0
        assert bins[-1][1] == 3.0
        assert sum(count for _, _, count in bins) == 4

    def test_profit_stats(self):
        """Mean and sample sd; None without samples."""
        assert profit_stats([]) == {"mean_l": None, "sd_l": None}
        stats = profit_stats([1.0, 3.0])
        assert stats["mean_l"] == 2.0
        assert stats["sd_l"] == pytest.approx(2.0**0.5)
        assert profit_stats([4.0])["sd_l"] == 0.0

    def test_update_summary_merges(self, tmp_path):
        """Later commands add keys to an existing summary."""
        path = tmp_path / "summary.json"
        update_summary(path, {"final_u": 5.0})
        merged = update_summary(path, {"simulation": {"mean": 1.0}})
        assert merged == {"final_u": 5.0, "simulation": {"mean": 1.0}}


class TestWorkers:
    """Tests for the ordered worker pool."""

    def test_explicit_count(self):
        """An explicit count wins and is at least 1."""
        assert worker_count(3) == 3
        assert worker_count(0) == 1

    def test_env_count(self, monkeypatch):
        """GBDP_THREADS sets the default."""
        monkeypatch.setenv("GBDP_THREADS", "5")
        assert worker_count() == 5

    def test_invalid_env_ignored(self, monkeypatch):
        """A non-integer GBDP_THREADS falls back to the CPU count."""
        monkeypatch.setenv("GBDP_THREADS", "many")
        assert worker_count() >= 1

    def test_results_in_input_order(self):
        """Slow early items do not reorder results."""
        def work(k: int) -> int:
            time.sleep(0.01 * (5 - k))
            return k * k
        assert run_ordered(work, range(5), max_workers=4) == [0, 1, 4, 9, 16]

    def test_empty(self):
        """No items, no results."""
        assert run_ordered(lambda k: k, [], max_workers=2) == []
