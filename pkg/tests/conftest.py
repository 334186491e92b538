import numpy as np
import pytest

from npamp.amp import Dataset, SolverSettings
from npamp.expectile import ExpectileSpec


def make_sparse_instance(n, p, s, noise_sd=0.5, seed=0, signal_scale=3.0):
    """A homoscedastic sparse regression draw: X ~ N(0, I/n) rows."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p)) / np.sqrt(n)
    beta0 = np.zeros(p)
    beta0[:s] = signal_scale * rng.standard_normal(s)
    y = x @ beta0 + noise_sd * rng.standard_normal(n)
    return Dataset(y, x), beta0


@pytest.fixture(scope="session")
def small_instance():
    """60 x 120 homoscedastic instance shared by solver-level tests."""
    return make_sparse_instance(60, 120, 4, seed=11)


@pytest.fixture(scope="session")
def desk_instance():
    """100 x 200 instance matching the simulation default size."""
    return make_sparse_instance(100, 200, 5, seed=3)


@pytest.fixture
def fast_solver():
    """Single-multiplier settings for tests that only need one fit."""
    return SolverSettings(alpha_grid=(1.5,))


@pytest.fixture
def mean_spec():
    return ExpectileSpec(0.5, 0.0)
