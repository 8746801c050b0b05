"""Shared test fixtures: seeded rasters and brute-force reference filters."""

import math

import numpy as np

from panfuse import Raster


def random_raster(seed, height, width, bands, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return Raster(lo + (hi - lo) * rng.random((height, width, bands)))


def separated_pair(seed, height=8, width=8, bands=4):
    """A (fused, reference) pair whose per-element gap stays away from zero,
    so l1-style losses are differentiable at the test point."""
    rng = np.random.default_rng(seed)
    f = 0.05 + 0.9 * rng.random((height, width, bands))
    gap = (0.02 + 0.18 * rng.random(f.shape)) * rng.choice([-1.0, 1.0], size=f.shape)
    return Raster(f), Raster(f + gap)


def reflect_index(i, n):
    """Symmetric (half-sample) reflection of index i into [0, n)."""
    m = i % (2 * n)
    return m if m < n else 2 * n - 1 - m


def gaussian_taps(radius, sigma):
    taps = np.array(
        [math.exp(-0.5 * (j / sigma) ** 2) for j in range(-radius, radius + 1)]
    )
    return taps / taps.sum()


def brute_force_blur(arr, taps):
    """Separable correlation with reflected borders, written as plain loops."""
    h, w, b = arr.shape
    radius = len(taps) // 2
    tmp = np.zeros_like(arr)
    for k in range(b):
        for y in range(h):
            for x in range(w):
                tmp[y, x, k] = sum(
                    taps[j] * arr[reflect_index(y - radius + j, h), x, k]
                    for j in range(len(taps))
                )
    out = np.zeros_like(arr)
    for k in range(b):
        for y in range(h):
            for x in range(w):
                out[y, x, k] = sum(
                    taps[j] * tmp[y, reflect_index(x - radius + j, w), k]
                    for j in range(len(taps))
                )
    return out


def brute_force_downsample(arr, ratio):
    """Gaussian blur (sigma=ratio/2, radius 2*ratio) then stride-ratio decimation."""
    taps = gaussian_taps(2 * ratio, ratio / 2.0)
    return brute_force_blur(arr, taps)[::ratio, ::ratio, :]
