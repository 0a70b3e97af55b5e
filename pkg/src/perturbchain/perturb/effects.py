"""The twelve perturbation implementations.

Photometric effects take ``(img, params, rng)`` and return a new image array;
geometric effects take ``(img, mask, params)`` and return co-transformed
``(img, mask)`` arrays. Inputs are (h, w, 3) float32 in [0, 1] and (h, w)
bool; clipping to [0, 1] happens in the dispatcher, but every effect is
written so that its neutral parameters reproduce the input bit for bit.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import bilinear_sample, nearest_sample, output_grid
from .texture import fractal_noise, line_kernel

__all__ = ["PHOTOMETRIC", "GEOMETRIC"]

_FOG_SHADE = 0.7
_RAIN_SHADE = 0.65
_SNOW_SHADE = 0.58


# --- photometric -----------------------------------------------------------

def gaussian_blur(img, p, rng):
    sigma = p["radius"]
    if sigma <= 0.0:
        return img
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="nearest")


def motion_blur(img, p, rng):
    length = int(p["length"])
    if length <= 1:
        return img
    kernel = line_kernel(length, p["angle"])
    kernel /= kernel.sum()
    out = np.empty_like(img)
    for c in range(3):
        out[:, :, c] = ndimage.convolve(img[:, :, c], kernel, mode="nearest")
    return out


def gaussian_noise(img, p, rng):
    sigma = p["sigma"]
    if sigma <= 0.0:
        return img
    noise = rng.standard_normal(img.shape, dtype=np.float32)
    return img + np.float32(sigma) * noise


def impulse_noise(img, p, rng):
    amount = p["amount"]
    if amount <= 0.0:
        return img
    u = rng.random(img.shape[:2])
    out = img.copy()
    out[u < amount / 2.0] = 1.0
    out[u > 1.0 - amount / 2.0] = 0.0
    return out


def brightness(img, p, rng):
    return img + np.float32(p["delta"])


def contrast(img, p, rng):
    f = p["factor"]
    # this form is exactly the identity at f == 1
    return np.float32(f) * img + np.float32((1.0 - f) * 0.5)


def fog(img, p, rng):
    intensity = p["intensity"]
    if intensity <= 0.0:
        return img
    h, w = img.shape[:2]
    haze = fractal_noise(rng, h, w, octaves=5, persistence=p["roughness"])
    alpha = (intensity * haze)[..., None].astype(np.float32)
    return img * (1.0 - alpha) + alpha * np.float32(_FOG_SHADE)


def _streak_layer(rng, shape, density, size, length, angle_deg, blur_sigma):
    """Random drops dilated to `size`, smeared into streaks of `length`."""
    drops = (rng.random(shape) < density).astype(np.float64)
    if size > 1:
        drops = ndimage.maximum_filter(drops, size=int(size), mode="constant")
    if length > 1:
        drops = ndimage.convolve(drops, line_kernel(int(length), angle_deg), mode="constant")
    if blur_sigma > 0.0:
        drops = ndimage.gaussian_filter(drops, blur_sigma, mode="constant")
    return np.clip(drops, 0.0, 1.0)


def rain(img, p, rng):
    if p["density"] <= 0.0 or p["opaqueness"] <= 0.0:
        return img
    layer = _streak_layer(
        rng,
        img.shape[:2],
        density=p["density"],
        size=int(p["size"]),
        length=int(p["speed"]),
        angle_deg=90.0 - p["angle"],  # streaks fall along the drop direction
        blur_sigma=p["blur"],
    )
    alpha = (p["opaqueness"] * layer)[..., None].astype(np.float32)
    return img * (1.0 - alpha) + alpha * np.float32(_RAIN_SHADE)


def snow(img, p, rng):
    if p["density"] <= 0.0 or p["opaqueness"] <= 0.0:
        return img
    layer = _streak_layer(
        rng,
        img.shape[:2],
        density=p["density"],
        size=int(p["size"]),
        length=3,  # flakes drift a little instead of streaking
        angle_deg=90.0 - p["angle"],
        blur_sigma=0.5,
    )
    alpha = (p["opaqueness"] * layer)[..., None].astype(np.float32)
    return img * (1.0 - alpha) + alpha * np.float32(_SNOW_SHADE)


# --- geometric --------------------------------------------------------------

def affine(img, mask, p):
    dx, dy, angle = p["dx"], p["dy"], p["angle"]
    if dx == 0.0 and dy == 0.0 and angle == 0.0:
        return img, mask
    h, w = mask.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = output_grid(h, w)
    # invert: rotate by -angle about the center, then undo the translation
    theta = np.deg2rad(angle)
    yr = ys - cy - dy
    xr = xs - cx - dx
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_x = cos_t * xr + sin_t * yr + cx
    src_y = -sin_t * xr + cos_t * yr + cy
    return bilinear_sample(img, src_y, src_x), nearest_sample(mask, src_y, src_x)


def zoom(img, mask, p):
    scale = p["scale"]
    if scale == 1.0:
        return img, mask
    h, w = mask.shape
    cy = p["cy"] * (h - 1)
    cx = p["cx"] * (w - 1)
    ys, xs = output_grid(h, w)
    src_y = cy + (ys - cy) / scale
    src_x = cx + (xs - cx) / scale
    return bilinear_sample(img, src_y, src_x), nearest_sample(mask, src_y, src_x)


def padding(img, mask, p):
    left, top, right, bottom = p["left"], p["top"], p["right"], p["bottom"]
    if left == 0.0 and top == 0.0 and right == 0.0 and bottom == 0.0:
        return img, mask
    h, w = mask.shape
    ys, xs = output_grid(h, w)
    # shrink the content into a canvas padded by the given fractions
    src_x = (xs + 0.5) * (1.0 + left + right) - 0.5 - left * w
    src_y = (ys + 0.5) * (1.0 + top + bottom) - 0.5 - top * h
    return bilinear_sample(img, src_y, src_x), nearest_sample(mask, src_y, src_x)


PHOTOMETRIC = {
    "gaussian_blur": gaussian_blur,
    "motion_blur": motion_blur,
    "gaussian_noise": gaussian_noise,
    "impulse_noise": impulse_noise,
    "brightness": brightness,
    "contrast": contrast,
    "fog": fog,
    "rain": rain,
    "snow": snow,
}

GEOMETRIC = {
    "affine": affine,
    "zoom": zoom,
    "padding": padding,
}
