"""Per-parameter strength calibration.

Each perturbation parameter is swept on a uniform grid away from its neutral
value (toward the hard maximum, and separately toward the hard minimum when
the neutral sits mid-range) while every other parameter of that perturbation
stays neutral. The calibrated limit is the strength at which the mean IoU
deterioration over the calibration dataset first reaches the target:
interpolated between the bracketing grid points and then refined by measured
bisection until the re-measured deterioration lands near the target.
Parameters whose full hard range never reaches the target keep the hard
limit.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .imgcore import Image, Mask, ThresholdSet, DEFAULT_THRESHOLDS, deterioration, iou
from .perturb import (
    ParamBound,
    ParamBounds,
    PerturbationSpec,
    Registry,
    apply,
    default_registry,
    neutral_params,
)
from .seeds import mix

__all__ = ["CalibrationConfig", "calibrate_param", "calibrate_all", "BoundsCalibrator"]


@dataclass(frozen=True, eq=False)
class CalibrationConfig:
    dataset: Sequence[tuple[Image, Mask]]
    model: object  # anything with predict(Image) -> ProbMap
    grid_points: int = 16
    target: float = 0.01
    seed: int = 0
    taus: ThresholdSet = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if not 0.0 < self.target < 1.0:
            raise ValueError("target deterioration must lie in (0, 1)")
        if len(self.dataset) == 0:
            raise ValueError("calibration dataset must be non-empty")


def baseline_ious(cfg: CalibrationConfig) -> list[float]:
    """IoUs of the model on the unperturbed dataset (computed once, cached by callers)."""
    return [iou(cfg.model.predict(img), mask, cfg.taus) for img, mask in cfg.dataset]


def measure_deterioration(
    spec: PerturbationSpec,
    params: np.ndarray,
    cfg: CalibrationConfig,
    baselines: Sequence[float],
    seed_tokens: tuple[int, ...],
) -> float:
    """Mean IoU drop when `spec` at `params` is applied to the whole dataset.

    Per-image noise seeds are derived from the image content, not its index,
    so duplicating dataset entries cannot change the measured mean.
    """
    perturbed = []
    for img, mask in cfg.dataset:
        seed = mix(cfg.seed, *seed_tokens, zlib.crc32(img.data.tobytes()))
        p_img, p_mask = apply(spec, params, img, mask, seed)
        perturbed.append(iou(cfg.model.predict(p_img), p_mask, cfg.taus))
    det = deterioration(baselines, perturbed)
    if not math.isfinite(det):
        raise ArithmeticError(f"non-finite deterioration for {spec.name} at {params}")
    return det


_REFINE_BAND = (0.5, 2.0)  # accepted deterioration, as multiples of the target
_REFINE_STEPS = 12


def _sweep(
    spec: PerturbationSpec,
    param_index: int,
    end: float,
    cfg: CalibrationConfig,
    baselines: Sequence[float],
    registry_index: int,
) -> float:
    """Grid-sweep one parameter from neutral toward `end`.

    Returns the strength whose measured deterioration is close to the target,
    or `end` itself when even the hard limit stays below the target. Scanning
    stops at the first grid exceedance so everything below the returned bound
    was observed to be safe on the grid; the bound is then refined inside the
    bracketing grid cell (deterioration can dip negative and then jump, so a
    single linear interpolation may land far off target).
    """
    p = spec.params[param_index]
    grid = np.linspace(p.neutral, end, cfg.grid_points)
    prev_value, prev_det = p.neutral, 0.0  # neutral parameters are the identity
    direction = 0 if end >= p.neutral else 1

    def measure(value: float, token: int) -> float:
        params = neutral_params(spec)
        params[param_index] = value
        return measure_deterioration(
            spec, params, cfg, baselines, (registry_index, param_index, direction, token)
        )

    for gi, value in enumerate(grid[1:], start=1):
        det = measure(float(value), gi)
        if det > cfg.target:
            return _refine(measure, prev_value, prev_det, float(value), det, cfg.target)
        prev_value, prev_det = float(value), det
    return float(end)


def _refine(measure, lo, lo_det, hi, hi_det, target) -> float:
    """Interpolate/bisect inside [lo, hi] until the measured deterioration
    lands within the accepted band around the target; stays below the first
    observed exceedance throughout."""
    band_lo, band_hi = _REFINE_BAND[0] * target, _REFINE_BAND[1] * target
    best_safe = lo
    for step in range(_REFINE_STEPS):
        if hi_det > lo_det:
            frac = (target - lo_det) / (hi_det - lo_det)
            candidate = lo + min(max(frac, 0.05), 0.95) * (hi - lo)
        else:
            candidate = (lo + hi) / 2.0
        det = measure(candidate, 1000 + step)
        if band_lo <= det <= band_hi:
            return candidate
        if det > target:
            hi, hi_det = candidate, det
        else:
            lo, lo_det = candidate, det
            best_safe = candidate
    return best_safe


def calibrate_param(
    spec: PerturbationSpec,
    param_index: int,
    cfg: CalibrationConfig,
    baselines: Sequence[float] | None = None,
    registry_index: int = 0,
) -> ParamBound:
    """Calibrate one parameter; interior neutrals get both directions swept."""
    if baselines is None:
        baselines = baseline_ious(cfg)
    p = spec.params[param_index]
    hi = p.neutral
    lo = p.neutral
    if p.hard_max > p.neutral:
        hi = _sweep(spec, param_index, p.hard_max, cfg, baselines, registry_index)
    if p.hard_min < p.neutral:
        lo = _sweep(spec, param_index, p.hard_min, cfg, baselines, registry_index)
    return ParamBound(p.neutral, lo, hi)


def calibrate_all(
    registry: Registry,
    cfg: CalibrationConfig,
    out_path: str | Path | None = None,
) -> ParamBounds:
    """Calibrate every parameter of every registered perturbation.

    Disabled perturbations are calibrated too (so re-enabling them later
    needs no new run) and only marked disabled in the result.
    """
    baselines = baseline_ious(cfg)
    bounds: dict[str, dict[str, ParamBound]] = {}
    for reg_idx, spec in enumerate(registry):
        bounds[spec.name] = {
            p.name: calibrate_param(spec, pi, cfg, baselines, reg_idx)
            for pi, p in enumerate(spec.params)
        }
    result = ParamBounds(bounds, registry.disabled)
    result.validate(registry)
    if out_path is not None:
        result.save(out_path)
    return result


class BoundsCalibrator(BaseEstimator):
    """Estimator facade: fit(dataset pairs, model) learns `bounds_`."""

    def __init__(self, grid_points: int = 16, target: float = 0.01, seed: int = 0):
        self.grid_points = grid_points
        self.target = target
        self.seed = seed

    def fit(self, X: Sequence[tuple[Image, Mask]], y=None, *, model, registry: Registry | None = None):
        registry = registry if registry is not None else default_registry()
        cfg = CalibrationConfig(
            dataset=X, model=model, grid_points=self.grid_points, target=self.target, seed=self.seed
        )
        self.bounds_ = calibrate_all(registry, cfg)
        return self
