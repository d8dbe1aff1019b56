"""Shared fixtures: desk-scale problem instances and their exact solutions."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.oracle.exact import exact_solve
from src.problems.ahd import AhdPricingProblem, MnlParams
from src.problems.tabular import MenuOption, TabularProblem

PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"


def make_params(**overrides) -> MnlParams:
    """Synthetic tiny AHD instance; keyword arguments override single fields."""
    values = dict(
        lam=0.05,
        beta_c=0.0,
        beta_s=(0.0, 0.0),
        beta_d=-0.3,
        r=34.53,
        d_lo=0.0,
        d_hi=10.0,
        c_unit=0.083,
        x_bar=(2, 2),
        t_bar=20,
    )
    values.update(overrides)
    return MnlParams(**values)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    """Run worker fan-out inline unless a test asks for threads."""
    monkeypatch.setenv("GBDP_THREADS", "1")


@pytest.fixture
def tiny_problem():
    """n=2, x_bar=(2,2), t_bar=20, lambda=0.05."""
    return AhdPricingProblem(make_params())


@pytest.fixture
def short_problem():
    """Tiny instance with a short horizon, for tests that run many sweeps."""
    return AhdPricingProblem(make_params(t_bar=4))


@pytest.fixture
def one_slot_problem():
    """n=1, x_bar=(2), t_bar=3."""
    return AhdPricingProblem(make_params(
        lam=0.5, beta_s=(0.0,), r=4.0, c_unit=0.5, x_bar=(2,), t_bar=3,
    ))


@pytest.fixture
def unit_price_problem():
    """n=1, x_bar=(1), t_bar=1, lambda=0.5, beta_d=-1, r=4, single price 0, no cost."""
    return AhdPricingProblem(make_params(
        lam=0.5, beta_s=(0.0,), beta_d=-1.0, r=4.0, d_lo=0.0, d_hi=0.0, c_unit=0.0,
        x_bar=(1,), t_bar=1,
    ))


@pytest.fixture
def tabular_problem():
    """Two-decision menu on a 2x2 box: a cautious and an aggressive offer."""
    menu = [
        MenuOption(np.array([0.8, 0.1, 0.1]), np.array([0.0, 6.0, 5.0])),
        MenuOption(np.array([0.5, 0.3, 0.2]), np.array([0.0, 3.0, 2.5])),
    ]
    return TabularProblem(x_bar=(2, 2), t_bar=5, menu=menu, c_unit=0.4)


@pytest.fixture
def short_exact(short_problem):
    return exact_solve(short_problem)


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a JSON file under tmp_path and return its path."""
    def _write(config: dict, name: str = "run.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return path
    return _write
