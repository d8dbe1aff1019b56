"""
Command-line entry point: gbdp train | simulate | exact | verify | compare.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from src.config import RunConfig, load_run_config, setup_problem
from src.oracle.checks import verification_passed, verification_report
from src.oracle.exact import ExactSolveRefused, ExactValueTable, exact_solve
from src.problems.base import ProblemDefinition
from src.reporting import (
    TraceWriter,
    histogram,
    profit_stats,
    update_summary,
    write_histogram,
    write_json,
    write_profits,
)
from src.solver.gbdp import IterationRecord, ResampleMode, train
from src.solver.simulate import ProfitSummary, simulate
from src.startup import print_run_banner, run_startup_checks
from src.validation import ConfigError
from src.values.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from src.values.pwa import ValueStack

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_EXACT_CAP = 4

TRACE_FILE = "trace.csv"
CUTS_FILE = "cuts.jsonl"
SUMMARY_FILE = "summary.json"
PROFITS_FILE = "profits.csv"
HISTOGRAM_FILE = "histogram.csv"
EXACT_FILE = "exact_values.bin"
VERIFY_FILE = "verify.json"
COMPARISON_FILE = "comparison.json"


class PartialRunError(Exception):
    """Training failed after some iterations were already written."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbdp",
        description="Gradient-bounded dynamic programming solver",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--quiet", action="store_true", help="Skip the run banner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", nargs="?", help="Path to config file (default: config/tiny.json)")
        p.add_argument("--out", help="Output directory (overrides run.out_dir)")
        p.add_argument("--seed", type=int, help="Root seed (overrides solver.seed)")

    p_train = sub.add_parser("train", help="Run training iterations and write trace + cuts")
    common(p_train)
    p_train.add_argument("--i-max", type=int, help="Override solver.i_max")
    p_train.add_argument("--no-timing", action="store_true",
                         help="Write wall_ms as 0 so seeded runs give byte-identical traces")

    p_sim = sub.add_parser("simulate", help="Simulate booking horizons with a trained stack")
    common(p_sim)
    p_sim.add_argument("--checkpoint", required=True, help="cuts.jsonl from a training run")
    p_sim.add_argument("--n", type=int, help="Replications (overrides run.replications)")
    p_sim.add_argument("--reference", type=float, help="Test the mean profit against this value")

    p_exact = sub.add_parser("exact", help="Solve the instance exactly (desk scale only)")
    common(p_exact)
    p_exact.add_argument("--cap", type=int, help="Maximum state-time evaluations")

    p_verify = sub.add_parser("verify", help="Check a trained stack against the exact values")
    common(p_verify)
    p_verify.add_argument("--checkpoint", required=True, help="cuts.jsonl from a training run")
    p_verify.add_argument("--exact", help="exact_values.bin (solved on the fly if omitted)")
    p_verify.add_argument("--cap", type=int, help="Cap for an on-the-fly exact solve")

    p_compare = sub.add_parser("compare", help="Simulate snapshots taken during one training run")
    common(p_compare)
    p_compare.add_argument("--i-max", type=int, help="Override solver.i_max")
    p_compare.add_argument("--n", type=int, help="Replications per snapshot")
    p_compare.add_argument("--no-timing", action="store_true",
                           help="Write wall_ms as 0 so seeded runs give byte-identical traces")

    return parser


def _prepare(args) -> tuple[RunConfig, ProblemDefinition, Path]:
    run_config = load_run_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}", "INVALID_VALUE")
        run_config.solver.seed = args.seed
    if getattr(args, "i_max", None) is not None:
        if args.i_max < 1:
            raise ConfigError(f"--i-max must be >= 1, got {args.i_max}", "INVALID_VALUE")
        run_config.solver.i_max = args.i_max
    if getattr(args, "no_timing", False):
        run_config.timing = False

    problem = setup_problem(run_config.problem)
    out_dir = Path(args.out or run_config.out_dir)
    run_startup_checks(run_config, problem, out_dir)
    if not args.quiet:
        print_run_banner(args.command, run_config, problem, out_dir)
    return run_config, problem, out_dir


def _exact_for_resampling(run_config: RunConfig, problem: ProblemDefinition):
    if run_config.solver.resample_mode is ResampleMode.ORACLE_ASSISTED:
        return exact_solve(problem, run_config.exact_cap)
    return None


def _train_streaming(run_config: RunConfig, problem: ProblemDefinition, out_dir: Path,
                     snapshots: Optional[dict] = None):
    """Train while streaming trace rows; snapshots maps iteration -> frozen stack."""
    exact_table = _exact_for_resampling(run_config, problem)
    wanted = set(run_config.snapshots) if snapshots is not None else set()

    with TraceWriter(out_dir / TRACE_FILE, timing=run_config.timing) as writer:
        def on_iteration(record: IterationRecord, stack: ValueStack) -> None:
            writer.write(record)
            if record.iter in wanted:
                snapshots[record.iter] = stack.snapshot()

        try:
            return train(problem, run_config.solver, exact_table, on_iteration)
        except Exception as e:
            raise PartialRunError(
                f"Training failed after {writer.rows} iterations: {e}"
            ) from e


def cmd_train(args) -> int:
    run_config, problem, out_dir = _prepare(args)
    started = time.perf_counter()
    stack, trace = _train_streaming(run_config, problem, out_dir)
    total_ms = (time.perf_counter() - started) * 1000.0

    save_checkpoint(stack, out_dir / CUTS_FILE)
    stats = profit_stats(trace.lower_samples)
    final_u = trace.final.upper_bound
    summary = {
        "final_u": final_u,
        **stats,
        "gap": final_u - stats["mean_l"],
        "iters": len(trace),
        "total_wall_ms": total_ms if run_config.timing else 0.0,
        "case2_total": sum(r.case2_count for r in trace.records),
        "seed": run_config.solver.seed,
        "problem": problem.describe(),
    }
    write_json(out_dir / SUMMARY_FILE, summary)
    logger.info(f"Training done: u={final_u:.6f}, mean l={stats['mean_l']:.6f}")
    return EXIT_OK


def _load_stack(path: str, problem: ProblemDefinition) -> ValueStack:
    return load_checkpoint(Path(path), problem.t_bar, problem.n, problem.terminal_value)


def cmd_simulate(args) -> int:
    run_config, problem, out_dir = _prepare(args)
    stack = _load_stack(args.checkpoint, problem)
    replications = args.n if args.n is not None else run_config.replications
    if replications < 0:
        raise ConfigError(f"--n must be >= 0, got {replications}", "INVALID_VALUE")
    reference = args.reference if args.reference is not None else run_config.reference_value

    profits = simulate(problem, stack, replications, run_config.solver.seed)
    write_profits(out_dir / PROFITS_FILE, profits)
    write_histogram(out_dir / HISTOGRAM_FILE, profits)

    summary = ProfitSummary.from_profits(profits, reference)
    stats = profit_stats(profits)
    update_summary(out_dir / SUMMARY_FILE, {
        "simulation": {**summary.to_dict(), "seed": run_config.solver.seed},
        "mean": stats["mean_l"],
        "sd": stats["sd_l"],
    })
    if summary.n:
        logger.info(f"Simulated mean profit {summary.mean:.4f} (sd {summary.sd:.4f}, n={summary.n})")
    return EXIT_OK


def cmd_exact(args) -> int:
    run_config, problem, out_dir = _prepare(args)
    cap = args.cap if args.cap is not None else run_config.exact_cap
    table = exact_solve(problem, cap)
    table.save(out_dir / EXACT_FILE)
    print(f"V_1(0) = {table.v1_origin!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    run_config, problem, out_dir = _prepare(args)
    stack = _load_stack(args.checkpoint, problem)
    if args.exact:
        try:
            table = ExactValueTable.load(Path(args.exact))
        except (OSError, ValueError) as e:
            raise CheckpointError(f"Cannot load exact table: {e}", code="EXACT_TABLE_INVALID")
        if table.space != problem.space or table.t_bar != problem.t_bar:
            raise CheckpointError(
                "Exact table does not match the configured problem", code="CHECKPOINT_MISMATCH"
            )
    else:
        cap = args.cap if args.cap is not None else run_config.exact_cap
        table = exact_solve(problem, cap)

    report = verification_report(stack, table, run_config.solver.resolved_eps(problem))
    write_json(out_dir / VERIFY_FILE, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    if verification_passed(report):
        return EXIT_OK
    logger.warning("[VERIFY_FAIL] Verification failed; see verify.json")
    return EXIT_VERIFY_FAILED


def cmd_compare(args) -> int:
    run_config, problem, out_dir = _prepare(args)
    replications = args.n if args.n is not None else run_config.replications
    snapshots: dict[int, ValueStack] = {}
    _, trace = _train_streaming(run_config, problem, out_dir, snapshots)

    rows = []
    for iteration in sorted(snapshots):
        profits = simulate(problem, snapshots[iteration], replications, run_config.solver.seed)
        summary = ProfitSummary.from_profits(profits)
        u = trace.records[iteration - 1].upper_bound
        rows.append({
            "iter": iteration,
            "upper_bound": u,
            "mean": summary.mean,
            "sd": summary.sd,
            "se": summary.se,
            "gap": u - summary.mean,
            "histogram": [list(b) for b in histogram(profits)],
        })
        logger.info(f"Snapshot {iteration}: u={u:.4f}, mean={summary.mean:.4f}, sd={summary.sd:.4f}")

    gaps = [row["gap"] for row in rows]
    write_json(out_dir / COMPARISON_FILE, {
        "replications": replications,
        "seed": run_config.solver.seed,
        "snapshots": rows,
        "gap_shrinks": bool(np.all(np.diff(gaps) <= 0)) if len(gaps) > 1 else True,
    })
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    logging.getLogger().setLevel(logging.DEBUG if args.debug else logging.INFO)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as e:
        logger.error(f"{e} ({e.code})")
        return EXIT_CONFIG
    except ExactSolveRefused as e:
        logger.error(f"{e}")
        print(f"Exact solve refused: {e.required:.3g} evaluations required (cap {e.cap})")
        return EXIT_EXACT_CAP
    except PartialRunError as e:
        logger.error(f"{e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
