import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openkrotov.dynamics import TimeGrid
from openkrotov.spectral import (
    SpectralFilter, filtered_update, frequencies, out_of_band_fraction, spectral_penalty, spectral_power,
)

GRID = TimeGrid(10.0, 200)


def mode(k, grid=GRID):
    return np.cos(2 * np.pi * k * grid.control_times / grid.t_final)


def test_frequency_grid():
    w = frequencies(GRID)
    assert w[1] == pytest.approx(2 * np.pi / GRID.t_final)
    assert np.allclose(np.sort(np.abs(w))[:3], [0, w[1], w[1]])


def test_parseval():
    x = np.random.default_rng(1).normal(size=200)
    assert np.sum(spectral_power(x, GRID)) == pytest.approx(np.sum(x**2) / GRID.t_final, rel=1e-12)


def test_penalty_examples():
    wall = SpectralFilter.brick_wall(3.0, 1.0)
    assert spectral_penalty(wall, np.zeros(200), GRID) == 0.0
    assert spectral_penalty(wall, mode(2), GRID) == pytest.approx(0.0, abs=1e-20)  # omega ~ 1.26
    high = mode(20)  # omega ~ 12.6
    assert spectral_penalty(wall, high, GRID) == pytest.approx(np.sum(spectral_power(high, GRID)), rel=1e-12)


def test_filter_examples():
    raw = mode(20) + 0.3 * mode(1)
    assert np.allclose(filtered_update(SpectralFilter(1e-14, ((3.0, None, 1.0),)), raw, GRID), raw, atol=1e-12)
    assert np.allclose(filtered_update(SpectralFilter(5.0, ()), raw, GRID), raw, atol=1e-14)
    halved = filtered_update(SpectralFilter.brick_wall(3.0, 1.0), mode(20), GRID)
    np.testing.assert_allclose(halved, 0.5 * mode(20), atol=1e-13)


def test_multiple_filters_compose():
    a = SpectralFilter.brick_wall(3.0, 1.0)
    b = SpectralFilter(2.0, ((10.0, None, 1.0),))
    out = filtered_update([a, b], mode(20), GRID)
    np.testing.assert_allclose(out, mode(20) / 4, atol=1e-13)


def test_invalid_filters():
    with pytest.raises(ValueError):
        SpectralFilter(0.0)
    with pytest.raises(ValueError):
        SpectralFilter(1.0, ((2.0, 1.0, 1.0),))
    with pytest.raises(ValueError):
        SpectralFilter(1.0, ((0.0, None, -1.0),))
    with pytest.raises(ValueError):
        spectral_penalty(SpectralFilter.brick_wall(1.0, 1.0), np.zeros(10), GRID)


def test_kernel_is_even():
    filt = SpectralFilter(1.0, ((0.0, 2.0, 0.5), (4.0, math.inf, 3.0)))
    k = filt.kernel(GRID)
    w = frequencies(GRID)
    for i in range(1, 100):
        assert k[i] == k[-i] and w[i] == -w[-i]


def test_out_of_band_fraction():
    assert out_of_band_fraction(mode(1), GRID, 3.0) == pytest.approx(0.0, abs=1e-25)
    assert out_of_band_fraction(mode(20), GRID, 3.0) == pytest.approx(1.0)
    assert out_of_band_fraction(np.zeros(200), GRID, 3.0) == 0.0


signals = st.lists(st.floats(-10, 10), min_size=64, max_size=64)


@settings(max_examples=50, deadline=None)
@given(signals, signals, st.floats(0.01, 1000), st.floats(0.0, 20.0))
def test_filter_is_linear_contractive_and_reduces_penalty(x, y, alpha, cutoff):
    grid = TimeGrid(7.0, 64)
    x, y = np.array(x), np.array(y)
    filt = SpectralFilter.brick_wall(cutoff, alpha) if cutoff > 0 else SpectralFilter(alpha, ((0.0, None, 1.0),))
    fx, fy = filtered_update(filt, x, grid), filtered_update(filt, y, grid)
    np.testing.assert_allclose(filtered_update(filt, 2 * x - y, grid), 2 * fx - fy, atol=1e-10)
    assert np.linalg.norm(fx) <= np.linalg.norm(x) * (1 + 1e-12) + 1e-12
    assert spectral_penalty(filt, fx, grid) <= spectral_penalty(filt, x, grid) * (1 + 1e-12) + 1e-20
