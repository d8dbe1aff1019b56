"""
Strict schema validation for run configuration files.

Unknown keys are rejected at every level so that a typo never silently
falls back to a default.
"""

from dataclasses import dataclass
from numbers import Real
from typing import Optional


class ConfigError(Exception):
    """Raised when a configuration file is missing, unreadable or invalid."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


@dataclass
class ConfigValidationResult:
    valid: bool
    problem_type: str = ""
    error: Optional[str] = None
    error_code: Optional[str] = None


TOP_LEVEL_KEYS = {"problem", "solver", "run"}

AHD_KEYS = {
    "type", "lambda", "beta_c", "beta_s", "beta_d", "r", "d_lo", "d_hi", "c_unit",
    "x_bar", "t_bar", "beta_source", "price_oracle", "grid_step",
}
AHD_REQUIRED = {"type", "lambda", "beta_d", "r", "x_bar", "t_bar"}

TABULAR_KEYS = {"type", "x_bar", "t_bar", "menu", "c_unit"}
TABULAR_REQUIRED = {"type", "x_bar", "t_bar", "menu"}
MENU_KEYS = {"probs", "revenues"}

SOLVER_KEYS = {
    "i_max", "seed", "resample_mode", "eps_opt", "cut_anchor", "stale_continuation",
    "tie_tol", "sub_tol", "compact_cuts", "log_every",
}
RUN_KEYS = {"out_dir", "replications", "snapshots", "exact_cap", "timing", "reference_value"}

NUMBER_FIELDS = {
    "lambda", "beta_c", "beta_d", "r", "d_lo", "d_hi", "c_unit", "grid_step",
    "eps_opt", "tie_tol", "sub_tol", "reference_value",
}
INT_FIELDS = {"t_bar", "i_max", "seed", "log_every", "replications", "exact_cap"}
BOOL_FIELDS = {"stale_continuation", "compact_cuts", "timing"}
CHOICE_FIELDS = {
    "resample_mode": {"off", "oracle_assisted"},
    "cut_anchor": {"next", "current"},
    "price_oracle": {"structural", "grid"},
}


def _fail(message: str, code: str, problem_type: str = "") -> ConfigValidationResult:
    return ConfigValidationResult(valid=False, problem_type=problem_type, error=message, error_code=code)


def _is_number(value) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_keys(block: dict, allowed: set, where: str) -> Optional[ConfigValidationResult]:
    if not isinstance(block, dict):
        return _fail(f"'{where}' must be a mapping", "INVALID_TYPE")
    unknown = sorted(set(block) - allowed)
    if unknown:
        return _fail(f"Unknown key(s) in '{where}': {', '.join(unknown)}", "UNKNOWN_KEY")
    return None


def _check_fields(block: dict, where: str) -> Optional[ConfigValidationResult]:
    for key, value in block.items():
        if value is None and key in {"eps_opt", "tie_tol", "sub_tol", "reference_value"}:
            continue
        if key in NUMBER_FIELDS and not _is_number(value):
            return _fail(f"'{where}.{key}' must be a number, got {value!r}", "INVALID_TYPE")
        if key in INT_FIELDS and not _is_int(value):
            return _fail(f"'{where}.{key}' must be an integer, got {value!r}", "INVALID_TYPE")
        if key in BOOL_FIELDS and not isinstance(value, bool):
            return _fail(f"'{where}.{key}' must be true or false, got {value!r}", "INVALID_TYPE")
        if key in CHOICE_FIELDS and value not in CHOICE_FIELDS[key]:
            choices = ", ".join(sorted(CHOICE_FIELDS[key]))
            return _fail(f"'{where}.{key}' must be one of {choices}, got {value!r}", "INVALID_VALUE")
    return None


def _check_x_bar(problem: dict) -> Optional[ConfigValidationResult]:
    x_bar = problem.get("x_bar")
    if not isinstance(x_bar, list) or not x_bar:
        return _fail("'problem.x_bar' must be a non-empty list", "INVALID_TYPE")
    if not all(_is_int(v) and v >= 0 for v in x_bar):
        return _fail("'problem.x_bar' entries must be nonnegative integers", "INVALID_VALUE")
    return None


def _validate_ahd(problem: dict) -> Optional[ConfigValidationResult]:
    if result := _check_keys(problem, AHD_KEYS, "problem"):
        return result
    missing = sorted(AHD_REQUIRED - set(problem))
    if missing:
        return _fail(f"Missing key(s) in 'problem': {', '.join(missing)}", "MISSING_KEY")
    if result := _check_fields(problem, "problem") or _check_x_bar(problem):
        return result
    beta_s = problem.get("beta_s", 0.0)
    if isinstance(beta_s, list):
        if len(beta_s) != len(problem["x_bar"]) or not all(_is_number(b) for b in beta_s):
            return _fail("'problem.beta_s' must hold one number per slot", "INVALID_VALUE")
    elif not _is_number(beta_s):
        return _fail("'problem.beta_s' must be a number or a list", "INVALID_TYPE")
    return None


def _validate_tabular(problem: dict) -> Optional[ConfigValidationResult]:
    if result := _check_keys(problem, TABULAR_KEYS, "problem"):
        return result
    missing = sorted(TABULAR_REQUIRED - set(problem))
    if missing:
        return _fail(f"Missing key(s) in 'problem': {', '.join(missing)}", "MISSING_KEY")
    if result := _check_fields(problem, "problem") or _check_x_bar(problem):
        return result
    menu = problem["menu"]
    if not isinstance(menu, list) or not menu:
        return _fail("'problem.menu' must be a non-empty list", "INVALID_TYPE")
    width = len(problem["x_bar"]) + 1
    for k, entry in enumerate(menu):
        if result := _check_keys(entry, MENU_KEYS, f"problem.menu[{k}]"):
            return result
        for key in MENU_KEYS:
            values = entry.get(key)
            if not isinstance(values, list) or len(values) != width:
                return _fail(f"'problem.menu[{k}].{key}' must list {width} numbers", "INVALID_VALUE")
            if not all(_is_number(v) for v in values):
                return _fail(f"'problem.menu[{k}].{key}' must list numbers", "INVALID_TYPE")
    return None


PROBLEM_VALIDATORS = {
    "ahd": _validate_ahd,
    "tabular": _validate_tabular,
}


def validate_config(config) -> ConfigValidationResult:
    """Check structure, key names and field types of a loaded config."""
    if not isinstance(config, dict):
        return _fail("Config must be a mapping at the top level", "NOT_A_MAPPING")
    if result := _check_keys(config, TOP_LEVEL_KEYS, "<root>"):
        return result
    if "problem" not in config:
        return _fail("Config has no 'problem' block", "MISSING_KEY")

    problem = config["problem"]
    if not isinstance(problem, dict):
        return _fail("'problem' must be a mapping", "INVALID_TYPE")
    problem_type = problem.get("type")
    validator = PROBLEM_VALIDATORS.get(problem_type)
    if validator is None:
        return _fail(f"Unknown problem type {problem_type!r}", "UNKNOWN_PROBLEM_TYPE")
    if result := validator(problem):
        result.problem_type = problem_type
        return result

    for name, allowed in (("solver", SOLVER_KEYS), ("run", RUN_KEYS)):
        block = config.get(name, {})
        if result := _check_keys(block, allowed, name) or _check_fields(block, name):
            result.problem_type = problem_type
            return result

    snapshots = config.get("run", {}).get("snapshots")
    if snapshots is not None:
        if not isinstance(snapshots, list) or not all(_is_int(s) and s >= 1 for s in snapshots):
            return _fail("'run.snapshots' must be a list of positive integers", "INVALID_VALUE",
                         problem_type)

    return ConfigValidationResult(valid=True, problem_type=problem_type)
