"""Independent brute-force oracles the fast implementations are checked against.

Everything here is deliberately written with per-pixel Python loops and no
shared code with the package internals.
"""
from __future__ import annotations

import numpy as np


def iou_oracle(pred: np.ndarray, mask: np.ndarray, taus=(0.5, 0.9, 0.99)) -> float:
    """Per-pixel set counting over all thresholds; empty union counts as 1."""
    h, w = mask.shape
    total = 0.0
    for tau in taus:
        inter = 0
        union = 0
        for y in range(h):
            for x in range(w):
                p = float(pred[y, x]) > tau
                m = bool(mask[y, x])
                if p and m:
                    inter += 1
                if p or m:
                    union += 1
        total += 1.0 if union == 0 else inter / union
    return total / len(taus)


def shift_mask_oracle(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate a boolean mask by whole pixels, filling with false."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            sy, sx = y - dy, x - dx
            if 0 <= sy < h and 0 <= sx < w:
                out[y, x] = mask[sy, sx]
    return out


def zoom_mask_oracle(mask: np.ndarray, cx: float, cy: float, scale: float) -> np.ndarray:
    """Nearest-neighbor zoom about (cx, cy) in relative coordinates."""
    h, w = mask.shape
    ccy = cy * (h - 1)
    ccx = cx * (w - 1)
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            sy = ccy + (y - ccy) / scale
            sx = ccx + (x - ccx) / scale
            iy = int(np.floor(sy + 0.5))
            ix = int(np.floor(sx + 0.5))
            if 0 <= iy < h and 0 <= ix < w:
                out[y, x] = mask[iy, ix]
    return out


def smoothstep_oracle(lum: float, t0: float = 0.55, t1: float = 0.75) -> float:
    u = (lum - t0) / (t1 - t0)
    u = min(1.0, max(0.0, u))
    return 3.0 * u * u - 2.0 * u * u * u
