"""Perturbation parameter schemas, the registry, and the apply dispatcher."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ..imgcore import Image, Mask
from . import effects

__all__ = [
    "ParamSpec",
    "PerturbationSpec",
    "Registry",
    "default_registry",
    "apply",
    "neutral_params",
    "round_half_away",
]

REGISTRY_SIZE = 12


@dataclass(frozen=True)
class ParamSpec:
    """One scalar parameter of a perturbation."""

    name: str
    kind: str  # "continuous" | "integer"
    neutral: float
    hard_min: float
    hard_max: float

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "integer"):
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if not self.hard_min <= self.neutral <= self.hard_max:
            raise ValueError(
                f"parameter {self.name!r}: neutral {self.neutral} outside "
                f"[{self.hard_min}, {self.hard_max}]"
            )


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """A named perturbation with its parameter schema and implementation."""

    name: str
    params: tuple[ParamSpec, ...]
    geometric: bool
    fn: Callable

    def param_index(self, param_name: str) -> int:
        for i, p in enumerate(self.params):
            if p.name == param_name:
                return i
        raise KeyError(f"{self.name} has no parameter {param_name!r}")

    def schema_json(self) -> dict:
        return {
            "name": self.name,
            "geometric": self.geometric,
            "params": [
                {
                    "name": p.name,
                    "kind": p.kind,
                    "neutral": p.neutral,
                    "hard_min": p.hard_min,
                    "hard_max": p.hard_max,
                }
                for p in self.params
            ],
        }


class Registry:
    """Immutable ordered collection of exactly 12 perturbations.

    A per-run `disabled` set hides perturbations from chain selection without
    changing the registry order or the genome layout.
    """

    def __init__(self, specs: Sequence[PerturbationSpec], disabled: Iterable[str] = ()):
        specs = tuple(specs)
        if len(specs) != REGISTRY_SIZE:
            raise ValueError(f"registry must contain exactly {REGISTRY_SIZE} perturbations, got {len(specs)}")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("perturbation names must be unique")
        disabled = frozenset(disabled)
        unknown = disabled - set(names)
        if unknown:
            raise ValueError(f"disabled names not in registry: {sorted(unknown)}")
        self._specs = specs
        self._index = {s.name: i for i, s in enumerate(specs)}
        self.disabled = disabled

    @property
    def specs(self) -> tuple[PerturbationSpec, ...]:
        return self._specs

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self):
        return iter(self._specs)

    def get(self, name: str) -> PerturbationSpec:
        return self._specs[self.spec_index(name)]

    def spec_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown perturbation {name!r}") from None

    def enabled(self) -> tuple[PerturbationSpec, ...]:
        return tuple(s for s in self._specs if s.name not in self.disabled)

    def with_disabled(self, names: Iterable[str]) -> "Registry":
        return Registry(self._specs, names)

    @property
    def param_count(self) -> int:
        return sum(len(s.params) for s in self._specs)

    def to_json(self) -> dict:
        return {
            "perturbations": [s.schema_json() for s in self._specs],
            "disabled": sorted(self.disabled),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Registry":
        base = {s.name: s for s in default_registry()}
        specs = []
        for entry in data["perturbations"]:
            name = entry["name"]
            if name not in base:
                raise ValueError(f"no implementation for perturbation {name!r}")
            spec = base[name]
            declared = [
                ParamSpec(p["name"], p["kind"], p["neutral"], p["hard_min"], p["hard_max"])
                for p in entry["params"]
            ]
            if tuple(declared) != spec.params or bool(entry["geometric"]) != spec.geometric:
                raise ValueError(f"schema for {name!r} does not match this build")
            specs.append(spec)
        return cls(specs, data.get("disabled", ()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        return cls.from_json(json.loads(Path(path).read_text()))


def _p(name: str, neutral: float, lo: float, hi: float, kind: str = "continuous") -> ParamSpec:
    return ParamSpec(name, kind, neutral, lo, hi)


def default_registry(disabled: Iterable[str] = ()) -> Registry:
    specs = (
        PerturbationSpec("gaussian_blur", (_p("radius", 0.0, 0.0, 4.0),), False, effects.gaussian_blur),
        PerturbationSpec(
            "motion_blur",
            # neutral angle sits diagonally so the length sweep measures a
            # representative mix of horizontal and vertical smear
            (_p("length", 1, 1, 15, "integer"), _p("angle", 45.0, -90.0, 90.0)),
            False,
            effects.motion_blur,
        ),
        PerturbationSpec("gaussian_noise", (_p("sigma", 0.0, 0.0, 0.25),), False, effects.gaussian_noise),
        PerturbationSpec("impulse_noise", (_p("amount", 0.0, 0.0, 0.2),), False, effects.impulse_noise),
        PerturbationSpec("brightness", (_p("delta", 0.0, -0.5, 0.5),), False, effects.brightness),
        PerturbationSpec("contrast", (_p("factor", 1.0, 0.4, 1.5),), False, effects.contrast),
        PerturbationSpec(
            "fog",
            (_p("intensity", 0.0, 0.0, 0.8), _p("roughness", 0.5, 0.3, 0.8)),
            False,
            effects.fog,
        ),
        PerturbationSpec(
            # density carries the identity, so the partner parameters rest
            # near their strongest settings: the density sweep then measures
            # close to worst-case rain instead of leaving it uncalibrated
            "rain",
            (
                _p("opaqueness", 0.7, 0.0, 1.0),
                _p("size", 2, 1, 2, "integer"),
                _p("density", 0.0, 0.0, 0.02),
                _p("blur", 0.0, 0.0, 1.0),
                _p("angle", 0.0, -60.0, 60.0),
                _p("speed", 6, 1, 8, "integer"),
            ),
            False,
            effects.rain,
        ),
        PerturbationSpec(
            "snow",
            (
                _p("density", 0.0, 0.0, 0.08),
                _p("size", 2, 1, 2, "integer"),
                _p("opaqueness", 0.7, 0.0, 1.0),
                _p("angle", 0.0, -45.0, 45.0),
            ),
            False,
            effects.snow,
        ),
        PerturbationSpec(
            "affine",
            (_p("dx", 0.0, -12.0, 12.0), _p("dy", 0.0, -8.0, 8.0), _p("angle", 0.0, -15.0, 15.0)),
            True,
            effects.affine,
        ),
        PerturbationSpec(
            "zoom",
            (_p("cx", 0.5, 0.25, 0.75), _p("cy", 0.5, 0.25, 0.75), _p("scale", 1.0, 0.5, 2.0)),
            True,
            effects.zoom,
        ),
        PerturbationSpec(
            "padding",
            (
                _p("left", 0.0, 0.0, 0.25),
                _p("top", 0.0, 0.0, 0.25),
                _p("right", 0.0, 0.0, 0.25),
                _p("bottom", 0.0, 0.0, 0.25),
            ),
            True,
            effects.padding,
        ),
    )
    return Registry(specs, disabled)


def round_half_away(x: float) -> float:
    """Round to the nearest integer, ties away from zero."""
    return math.copysign(math.floor(abs(x) + 0.5), x)


def neutral_params(spec: PerturbationSpec) -> np.ndarray:
    """Parameter vector at which the perturbation is the identity."""
    return np.array([p.neutral for p in spec.params], dtype=np.float64)


def _resolve_params(spec: PerturbationSpec, params: Sequence[float]) -> dict[str, float]:
    values = np.asarray(params, dtype=np.float64)
    if values.shape != (len(spec.params),):
        raise ValueError(
            f"{spec.name} expects {len(spec.params)} parameters, got shape {values.shape}"
        )
    resolved = {}
    for p, v in zip(spec.params, values):
        v = float(v)
        if not np.isfinite(v):
            raise ValueError(f"{spec.name}.{p.name}: non-finite value")
        if not p.hard_min <= v <= p.hard_max:
            raise ValueError(
                f"{spec.name}.{p.name}: value {v} outside hard range "
                f"[{p.hard_min}, {p.hard_max}]"
            )
        resolved[p.name] = round_half_away(v) if p.kind == "integer" else v
    return resolved


def apply(
    spec: PerturbationSpec,
    params: Sequence[float],
    img: Image,
    mask: Mask,
    seed: int,
) -> tuple[Image, Mask]:
    """Apply one perturbation; geometric specs co-transform the mask.

    Fully deterministic given (params, seed): all randomness comes from a
    generator seeded here. Integer parameters are rounded half away from
    zero at this point, so optimizers can carry them as reals.
    """
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError(
            f"dimension mismatch: image {img.width}x{img.height} vs mask {mask.width}x{mask.height}"
        )
    p = _resolve_params(spec, params)
    if spec.geometric:
        out_img, out_mask = spec.fn(img.data, mask.data, p)
        return Image(np.clip(out_img, 0.0, 1.0)), Mask(out_mask)
    rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))
    out_img = spec.fn(img.data, p, rng)
    if out_img is img.data:
        return img, mask
    return Image(np.clip(out_img, 0.0, 1.0)), mask
