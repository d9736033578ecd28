import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dfosr.bands import simultaneous_band


def test_identical_draws_collapse():
    curve = np.linspace(-1, 2, 7)
    b = simultaneous_band(np.tile(curve, (150, 1)))
    for arr in (b.mean, b.lower, b.upper, b.sim_lower, b.sim_upper):
        assert np.allclose(arr, curve)


@given(arrays(np.float64, (120, 6), elements=st.floats(-100, 100)), st.floats(0.5, 0.99))
def test_nesting_and_mean_inside(draws, level):
    b = simultaneous_band(draws, level)
    assert np.all(b.sim_lower <= b.lower + 1e-12) and np.all(b.sim_upper >= b.upper - 1e-12)
    assert np.all(b.sim_lower <= b.mean + 1e-9) and np.all(b.mean <= b.sim_upper + 1e-9)


def test_constant_point_excluded():
    rng = np.random.default_rng(0)
    d = rng.standard_normal((500, 4))
    d[:, 2] = 3.0
    b = simultaneous_band(d)
    assert b.sim_lower[2] == b.sim_upper[2] == 3.0
    assert b.m_alpha > 1.96


def test_wider_than_pointwise_for_many_points():
    d = np.random.default_rng(1).standard_normal((4000, 30))
    b = simultaneous_band(d)
    assert np.all(b.sim_upper - b.sim_lower > b.upper - b.lower)


def test_input_validation():
    with pytest.raises(ValueError):
        simultaneous_band(np.zeros((50, 3)))
    with pytest.raises(ValueError):
        simultaneous_band(np.zeros((200, 3)), level=1.0)
    with pytest.raises(ValueError):
        simultaneous_band(np.zeros(200))


def band_coverage(trials=1000, n_draws=10_000, M=10, level=0.95, seed=0):
    """Share of trials whose band, built from N(0, I) draws, holds a fresh N(0, I) function.

    Equivalently: draws centered at a random c, and the zero function as truth.
    """
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        center = rng.standard_normal(M)
        draws = center + rng.standard_normal((n_draws, M))
        hits += simultaneous_band(draws, level).contains(np.zeros(M))
    return hits / trials


def test_band_coverage_small():
    cov = band_coverage(trials=200, n_draws=2000)
    assert 0.9 <= cov <= 0.99
