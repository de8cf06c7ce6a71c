"""Spectral penalty on control updates and its frequency-domain solution.

Transform convention: unitary DFT along the midpoint grid (``numpy.fft``
with ``norm="ortho"``) and angular frequencies ``omega_k = 2 pi k / T``.
Filters are given as bands ``(omega_min, omega_max, value)`` on ``|omega|``,
so the kernel is automatically even in ``omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import TimeGrid


@dataclass(frozen=True)
class SpectralFilter:
    """Penalty weight `alpha` and a piecewise-constant kernel ``K(omega) >= 0``.

    Bands are half-open, ``omega_min <= |omega| < omega_max``; later bands
    override earlier ones where they overlap, and the kernel is zero outside
    all bands.
    """

    alpha: float
    bands: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        bands = []
        for lo, hi, value in self.bands:
            hi = math.inf if hi is None else float(hi)
            lo, value = float(lo), float(value)
            if lo < 0 or hi <= lo:
                raise ValueError(f"invalid band ({lo}, {hi})")
            if value < 0 or not np.isfinite(value):
                raise ValueError("kernel values must be finite and nonnegative")
            bands.append((lo, hi, value))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "bands", tuple(bands))

    @classmethod
    def brick_wall(cls, cutoff: float, alpha: float) -> "SpectralFilter":
        """Zero penalty for ``|omega| < cutoff``, unit penalty above."""
        return cls(alpha, ((cutoff, math.inf, 1.0),))

    def kernel(self, grid: TimeGrid) -> np.ndarray:
        w = np.abs(frequencies(grid))
        k = np.zeros_like(w)
        for lo, hi, value in self.bands:
            k[(w >= lo) & (w < hi)] = value
        return k


def frequencies(grid: TimeGrid) -> np.ndarray:
    """Angular frequencies of the DFT bins, in ``numpy.fft`` order."""
    return 2 * np.pi * np.fft.fftfreq(grid.n_steps, d=grid.dt)


def _as_filters(filters) -> list[SpectralFilter]:
    if isinstance(filters, SpectralFilter):
        return [filters]
    return list(filters)


def _check(grid: TimeGrid, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != grid.n_steps:
        raise ValueError(f"expected {grid.n_steps} samples on the control grid, got {x.shape[-1]}")
    return x


def spectral_power(x, grid: TimeGrid) -> np.ndarray:
    """``|x(omega_k)|^2 * d_omega / (2 pi)`` per bin; sums to ``sum x^2 / T``."""
    x = _check(grid, x)
    spec = np.fft.fft(x, norm="ortho", axis=-1)
    return np.abs(spec) ** 2 / grid.t_final


def spectral_penalty(filt: SpectralFilter, delta_u, grid: TimeGrid) -> float:
    """Discrete ``sum_k K(omega_k) |du(omega_k)|^2 d_omega / (2 pi)``, summed over controls."""
    power = spectral_power(delta_u, grid)
    return float(np.sum(filt.kernel(grid) * power))


def filtered_update(filters: SpectralFilter | Sequence[SpectralFilter], raw_update, grid: TimeGrid) -> np.ndarray:
    """Solve the penalized update in frequency space: ``du(omega) / (1 + sum_i alpha_i K_i(omega))``."""
    raw = _check(grid, raw_update)
    denom = np.ones(grid.n_steps)
    for f in _as_filters(filters):
        denom += f.alpha * f.kernel(grid)
    spec = np.fft.fft(raw, norm="ortho", axis=-1)
    return np.fft.ifft(spec / denom, norm="ortho", axis=-1).real


def out_of_band_fraction(x, grid: TimeGrid, cutoff: float) -> float:
    """Share of the spectral power at ``|omega| >= cutoff``."""
    power = spectral_power(x, grid)
    mask = np.abs(frequencies(grid)) >= cutoff
    total = float(np.sum(power))
    return float(np.sum(power[..., mask])) / total if total > 0 else 0.0
