"""Coordinate-mapping resamplers shared by the geometric perturbations.

Images are resampled bilinearly, masks with nearest-neighbor so they stay
binary. Source coordinates that fall outside the input are filled with black
pixels / false mask bits.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["bilinear_sample", "nearest_sample", "output_grid", "interp_matrix"]


@lru_cache(maxsize=16)
def _cached_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    ys.flags.writeable = False
    xs.flags.writeable = False
    return ys, xs


def output_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates of every output pixel, as float64 (ys, xs)."""
    return _cached_grid(height, width)


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample an (h, w, c) or (h, w) image at float source coordinates.

    Out-of-frame neighbors contribute zero (black fill).
    """
    h, w = img.shape[:2]
    flat2d = img.ndim == 2
    flat = img.reshape(h * w, 1 if flat2d else img.shape[2])

    y0f = np.floor(ys)
    x0f = np.floor(xs)
    fy = (ys - y0f).ravel()[:, None]
    fx = (xs - x0f).ravel()[:, None]
    y0 = y0f.astype(np.int64).ravel()
    x0 = x0f.astype(np.int64).ravel()

    def corner(yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        idx = np.where(inside, yy * w + xx, 0)
        return flat.take(idx, axis=0) * inside[:, None]

    top = corner(y0, x0) * (1.0 - fx) + corner(y0, x0 + 1) * fx
    bot = corner(y0 + 1, x0) * (1.0 - fx) + corner(y0 + 1, x0 + 1) * fx
    out = top * (1.0 - fy) + bot * fy
    shape = ys.shape if flat2d else (*ys.shape, img.shape[2])
    return out.astype(np.float32).reshape(shape)


def nearest_sample(mask: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample an (h, w) boolean mask at float source coordinates.

    Nearest neighbor with half-up rounding; out-of-frame is false.
    """
    h, w = mask.shape
    yy = np.floor(ys + 0.5).astype(np.int64)
    xx = np.floor(xs + 0.5).astype(np.int64)
    inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
    flat_idx = np.where(inside, yy * w + xx, 0)
    return mask.reshape(-1).take(flat_idx) & inside


@lru_cache(maxsize=64)
def interp_matrix(n_out: int, n_src: int) -> np.ndarray:
    """(n_out, n_src) bilinear interpolation weights spanning the source range."""
    if n_src < 2:
        m = np.ones((n_out, 1))
        m.flags.writeable = False
        return m
    pos = np.linspace(0.0, n_src - 1, n_out)
    i0 = np.minimum(np.floor(pos).astype(np.int64), n_src - 2)
    f = pos - i0
    m = np.zeros((n_out, n_src))
    rows = np.arange(n_out)
    m[rows, i0] = 1.0 - f
    m[rows, i0 + 1] = f
    m.flags.writeable = False
    return m
