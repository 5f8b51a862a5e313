"""Shared factories for synthetic test imagery."""

from __future__ import annotations

import numpy as np

from somqe import RasterImage


def random_image(seed: int, height: int = 16, width: int = 16) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, (height, width, 3)).astype(np.float64))


def smooth_image(seed: int, size: int = 256, max_freq: float = 0.12) -> RasterImage:
    """Band-limited random field, gentle enough for subpixel resampling."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((size, size, 3))
    for c in range(3):
        acc = np.zeros((size, size))
        for _ in range(6):
            fx, fy = rng.uniform(0.02, max_freq, 2)
            phase = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.5, 1.0) * np.sin(fx * xs + fy * ys + phase)
        acc = (acc - acc.min()) / (acc.max() - acc.min())
        img[:, :, c] = 10.0 + 235.0 * acc
    return RasterImage(img)


def two_color_image(color_a, color_b, count_a: int, count_b: int) -> RasterImage:
    """A 1-row image holding count_a pixels of a and count_b of b."""
    row = [list(color_a)] * count_a + [list(color_b)] * count_b
    return RasterImage(np.array([row], dtype=np.float64))
