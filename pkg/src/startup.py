"""
Startup checks and validation.

Run before any command does real work to catch configuration issues early.
"""

import logging
import os
from pathlib import Path
from typing import Optional

from src.oracle.exact import required_evaluations
from src.problems.base import ProblemDefinition
from src.solver.gbdp import ResampleMode
from src.validation import ConfigError

logger = logging.getLogger(__name__)

# Cut storage above this many bytes is worth a warning
CUT_MEMORY_WARN_BYTES = 2 * 1024**3


def estimate_cut_memory(problem: ProblemDefinition, i_max: int) -> int:
    """Bytes for t_bar * (i_max + 1) cuts of n + 1 doubles."""
    return problem.t_bar * (i_max + 1) * (problem.n + 1) * 8


def check_output_dir(out_dir: Path) -> tuple[bool, Optional[str]]:
    """
    Check that the output directory exists (creating it) and is writable.

    Returns:
        (True, None) if usable
        (False, error_message) if not
    """
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        return False, f"Cannot create output directory {out_dir}: {e}"
    if not os.access(out_dir, os.W_OK):
        return False, f"Output directory {out_dir} is not writable"
    return True, None


def validate_run(run_config, problem: ProblemDefinition) -> list[str]:
    """
    Cross-check solver settings against the problem instance.

    Returns:
        List of warning/error messages (empty if all good)
    """
    issues = []
    solver = run_config.solver

    if solver.resample_mode is ResampleMode.ORACLE_ASSISTED:
        required = required_evaluations(problem)
        if required > run_config.exact_cap:
            issues.append(
                f"Oracle-assisted resampling needs an exact solve of {required:.3g} "
                f"evaluations, above exact_cap {run_config.exact_cap}."
            )

    if solver.eps_opt == 0.0 and problem.default_eps_opt() > 0.0:
        issues.append("eps_opt is 0 but the decision oracle is approximate; cuts may undercut V.")

    late = [s for s in run_config.snapshots if s > solver.i_max]
    if late:
        issues.append(f"Snapshots {late} lie beyond i_max={solver.i_max} and will be skipped.")

    if solver.compact_cuts and problem.space.cardinality > 100_000:
        issues.append(
            f"compact_cuts scans all {problem.space.cardinality} states every iteration."
        )

    return issues


def run_startup_checks(run_config, problem: ProblemDefinition, out_dir: Optional[Path] = None) -> None:
    """
    Run all startup checks. Raises ConfigError if critical issues are found.

    Args:
        run_config: Validated RunConfig
        problem: The problem instance built from it
        out_dir: Output directory the command will write to, if any
    """
    logger.info("Running startup checks...")

    errors = []
    warnings = []

    if out_dir is not None:
        usable, dir_error = check_output_dir(out_dir)
        if not usable:
            errors.append(dir_error)

    for issue in validate_run(run_config, problem):
        if "Oracle-assisted resampling" in issue:
            errors.append(issue)
        else:
            warnings.append(issue)

    memory = estimate_cut_memory(problem, run_config.solver.i_max)
    if memory > CUT_MEMORY_WARN_BYTES:
        warnings.append(f"Cut storage may reach {memory / 1024**2:.0f} MB.")

    for warning in warnings:
        logger.warning(f"  {warning}")

    if errors:
        logger.error("Startup checks failed:")
        for error in errors:
            logger.error(f"  {error}")
        raise ConfigError("; ".join(errors), "STARTUP_CHECK_FAILED")

    if warnings:
        logger.info(f"Startup checks passed with {len(warnings)} warning(s)")
    else:
        logger.info("Startup checks passed")


def print_run_banner(command: str, run_config, problem: ProblemDefinition,
                     out_dir: Optional[Path] = None) -> None:
    """Print a short banner with the instance size and output location."""
    solver = run_config.solver
    memory = estimate_cut_memory(problem, solver.i_max)

    print("")
    print("=" * 50)
    print(f"  Gradient-bounded DP: {command}")
    print("=" * 50)
    print("")
    print(f"  Config:       {run_config.source or '<in memory>'}")
    print(f"  Problem:      {run_config.problem_type} (n={problem.n}, x_bar={list(problem.space.x_bar)})")
    print(f"  States |X|:   {problem.space.cardinality}")
    print(f"  Horizon:      t_bar={problem.t_bar}")
    print(f"  Iterations:   i_max={solver.i_max}, seed={solver.seed}")
    print(f"  Cut memory:   ~{memory / 1024**2:.1f} MB")
    if out_dir is not None:
        print(f"  Output:       {out_dir}")
    print("")
    print("=" * 50)
    print("")
