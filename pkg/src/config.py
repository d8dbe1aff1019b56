"""
Configuration loading and problem setup.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from src.oracle.exact import DEFAULT_CAP
from src.problems import PROBLEM_TYPES, ProblemDefinition
from src.solver.gbdp import SolverConfig
from src.validation import ConfigError, validate_config

logger = logging.getLogger(__name__)

CONFIG_ENV = "GBDP_CONFIG"


@dataclass
class RunConfig:
    """A validated run: problem block, solver settings and output options."""

    problem: dict
    solver: SolverConfig
    out_dir: str = "runs/latest"
    replications: int = 1000
    snapshots: tuple[int, ...] = (1, 10, 100)
    exact_cap: int = DEFAULT_CAP
    timing: bool = True
    reference_value: Optional[float] = None
    source: Optional[Path] = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, config: dict, source: Optional[Path] = None) -> "RunConfig":
        """Validate and convert a loaded config; raises ConfigError on any problem."""
        result = validate_config(config)
        if not result.valid:
            raise ConfigError(result.error, result.error_code)
        run = config.get("run", {})
        try:
            solver = SolverConfig.from_dict(config)
        except ValueError as e:
            raise ConfigError(f"Invalid solver settings: {e}", "INVALID_VALUE")
        return cls(
            problem=dict(config["problem"]),
            solver=solver,
            out_dir=run.get("out_dir", "runs/latest"),
            replications=run.get("replications", 1000),
            snapshots=tuple(run.get("snapshots", (1, 10, 100))),
            exact_cap=run.get("exact_cap", DEFAULT_CAP),
            timing=run.get("timing", True),
            reference_value=run.get("reference_value"),
            source=source,
        )

    @property
    def problem_type(self) -> str:
        return self.problem["type"]


def find_config(config_path: Optional[str] = None) -> Path:
    """
    Locate the configuration file.

    Looks for config in order:
    1. Explicit path if provided
    2. GBDP_CONFIG environment variable
    3. ./config/local.json
    4. ./config/tiny.json
    """
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}", "CONFIG_NOT_FOUND")
        return path

    search_paths = []
    if env_path := os.environ.get(CONFIG_ENV):
        search_paths.append(Path(env_path))

    # Default paths relative to project root
    project_root = Path(__file__).parent.parent
    search_paths.extend([
        project_root / "config" / "local.json",
        project_root / "config" / "tiny.json",
    ])

    for path in search_paths:
        if path.exists():
            return path
    raise ConfigError("No config file found", "CONFIG_NOT_FOUND")


def load_config(config_path: Optional[str] = None) -> dict:
    """
    Load a YAML or JSON config.

    `.json` files go through the json module: YAML 1.1 reads exponents
    without a dot (1e-6) as strings.
    """
    path = find_config(config_path)
    logger.info(f"Loading config from {path}")
    try:
        with open(path) as f:
            if path.suffix == ".json":
                config = json.load(f)
            else:
                config = yaml.safe_load(f)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}", "INVALID_SYNTAX")
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}", "CONFIG_NOT_FOUND")
    if config is None:
        raise ConfigError(f"{path} is empty", "NOT_A_MAPPING")
    return config


def load_run_config(config_path: Optional[str] = None) -> RunConfig:
    path = find_config(config_path)
    return RunConfig.from_dict(load_config(str(path)), source=path)


def setup_problem(problem_config: dict) -> ProblemDefinition:
    """
    Build the problem instance named by `type`.

    Config format (ahd):
        problem:
          type: ahd
          lambda: 0.05
          beta_c: 0.0
          beta_s: 0.0
          beta_d: -0.3
          r: 34.53
          d_lo: 0.0
          d_hi: 10.0
          c_unit: 0.083
          x_bar: [2, 2]
          t_bar: 20
    """
    problem_type = problem_config.get("type")
    if problem_type not in PROBLEM_TYPES:
        raise ConfigError(f"Unknown problem type {problem_type!r}", "UNKNOWN_PROBLEM_TYPE")

    problem_class = PROBLEM_TYPES[problem_type]
    try:
        problem = problem_class.from_config(problem_config)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid {problem_type} problem: {e}", "INVALID_VALUE")
    logger.info(
        f"Set up {problem_type} problem: n={problem.n}, |X|={problem.space.cardinality}, "
        f"t_bar={problem.t_bar}"
    )
    return problem
