"""Model resolution: built-in test models and user-supplied callables.

A model is any callable mapping an (h, w, 3) float32 image in [0, 1] to an
(h, w) probability map in [0, 1].
"""
from __future__ import annotations

import importlib
from typing import Callable

import numpy as np

ModelFn = Callable[[np.ndarray], np.ndarray]


def echo_rect(img: np.ndarray) -> np.ndarray:
    """1.0 inside the centered half-size rectangle, 0.0 elsewhere.

    Depends only on the input dimensions; pixel bounds are floor(w/4) <= x <
    floor(3w/4) and likewise for y.
    """
    h, w = img.shape[:2]
    probs = np.zeros((h, w), dtype=np.float32)
    probs[h // 4 : (3 * h) // 4, w // 4 : (3 * w) // 4] = 1.0
    return probs


def constant(value: float) -> ModelFn:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"constant model value {value} outside [0, 1]")

    def model(img: np.ndarray) -> np.ndarray:
        return np.full(img.shape[:2], value, dtype=np.float32)

    return model


def load_callable(path: str):
    """Import `package.module:attribute` and return the attribute."""
    module_name, _, attr = path.partition(":")
    if not module_name or not attr:
        raise ValueError(f"expected 'module:attribute', got {path!r}")
    try:
        module = importlib.import_module(module_name)
    except ImportError as exc:
        raise ImportError(
            f"cannot import {module_name!r}: {exc}. Install the module in the "
            f"adapter environment (e.g. pip install {module_name.split('.')[0]})."
        ) from exc
    try:
        return getattr(module, attr)
    except AttributeError:
        raise ValueError(f"{module_name!r} has no attribute {attr!r}") from None


def resolve_model(name: str) -> ModelFn:
    """`echo_rect`, `constant:V`, or `module:path` to a callable."""
    if name == "echo_rect":
        return echo_rect
    if name.startswith("constant:"):
        return constant(float(name.partition(":")[2]))
    return load_callable(name)
