import numpy as np
import pytest

from inliq import PriceSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)


def make_walk_series(n_steps, step_sd, seed, x0=1.0, t0=0, dt_ms=1000, mu_step=0.0):
    """Arithmetic random-walk midprice series used across test modules."""
    rng = np.random.default_rng(seed)
    x = np.empty(n_steps)
    x[0] = x0
    np.cumsum(mu_step + step_sd * rng.standard_normal(n_steps - 1), out=x[1:])
    x[1:] += x0
    times = t0 + dt_ms * np.arange(n_steps, dtype=np.int64)
    return PriceSeries.from_mid(times, x)
