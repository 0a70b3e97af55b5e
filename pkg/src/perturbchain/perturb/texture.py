"""Procedural texture helpers: lattice value noise and line kernels."""
from __future__ import annotations

import numpy as np

from .geometry import interp_matrix

__all__ = ["value_noise", "fractal_noise", "line_kernel"]


def value_noise(rng: np.random.Generator, height: int, width: int, cells_y: int, cells_x: int) -> np.ndarray:
    """Smooth random field in [0, 1]: a random lattice upsampled bilinearly."""
    lattice = rng.random((cells_y + 1, cells_x + 1))
    return interp_matrix(height, cells_y + 1) @ lattice @ interp_matrix(width, cells_x + 1).T


def fractal_noise(
    rng: np.random.Generator,
    height: int,
    width: int,
    octaves: int = 5,
    persistence: float = 0.5,
) -> np.ndarray:
    """Multi-octave value noise, min-max normalized to [0, 1].

    Higher persistence keeps more energy in the fine octaves, giving a
    rougher field.
    """
    total = np.zeros((height, width), dtype=np.float64)
    amp = 1.0
    cells = 2
    for _ in range(octaves):
        total += amp * value_noise(rng, height, width, cells, cells)
        amp *= persistence
        cells *= 2
    lo, hi = float(total.min()), float(total.max())
    if hi - lo < 1e-12:
        return np.zeros_like(total)
    return (total - lo) / (hi - lo)


def line_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Unnormalized binary line segment of `length` pixels at `angle_deg`.

    Angle 0 is horizontal; positive angles rotate toward the +y (downward)
    axis. Returned as a square (length x length) float array of 0/1.
    """
    length = int(length)
    if length <= 1:
        return np.ones((1, 1))
    theta = np.deg2rad(angle_deg)
    center = (length - 1) / 2.0
    t = np.arange(length, dtype=np.float64) - center
    xs = np.clip(np.floor(center + t * np.cos(theta) + 0.5).astype(np.int64), 0, length - 1)
    ys = np.clip(np.floor(center + t * np.sin(theta) + 0.5).astype(np.int64), 0, length - 1)
    kernel = np.zeros((length, length), dtype=np.float64)
    kernel[ys, xs] = 1.0
    return kernel
