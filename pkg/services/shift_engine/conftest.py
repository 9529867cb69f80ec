import numpy as np
import pytest

from app.core.linalg import haar_subspace
from app.core.objectives import ModelPair
from app.schemas import ExperimentConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


@pytest.fixture
def axis_pair():
    """θ⁽⁰⁾ = e1, θ* = e1 + e2 in R^3: r = 1, Δ_b = e2, θ⁽⁰⁾ ⟂ θ*−θ⁽⁰⁾."""
    return ModelPair(theta_star=np.array([1.0, 1.0, 0.0]), theta0=np.array([1.0, 0.0, 0.0]))


@pytest.fixture
def haar_pair():
    subspace = haar_subspace(12, 5, seed=7)
    theta_star = 1.0 / np.arange(1, 13)
    return subspace, ModelPair.from_best_response(theta_star, subspace)


@pytest.fixture
def small_regression_config():
    return ExperimentConfig(setting="regression", d=20, subspace_rank=10, n_particles=8, T=30, seed=3, gamma=0.5)


@pytest.fixture
def small_classification_config():
    return ExperimentConfig(setting="classification", d=20, subspace_rank=10, n_particles=8, T=100, seed=3)


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str, name: str = "run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write
