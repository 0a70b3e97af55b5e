"""Calibrated per-parameter strength limits and their JSON file format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .specs import Registry

__all__ = ["ParamBound", "ParamBounds"]


@dataclass(frozen=True)
class ParamBound:
    """Calibrated range for one parameter; neutral always lies inside."""

    neutral: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.neutral <= self.hi:
            raise ValueError(
                f"neutral {self.neutral} outside calibrated range [{self.lo}, {self.hi}]"
            )


class ParamBounds:
    """Mapping perturbation name -> parameter name -> ParamBound."""

    def __init__(
        self,
        bounds: Mapping[str, Mapping[str, ParamBound]],
        disabled: Iterable[str] = (),
    ):
        self._bounds = {name: dict(params) for name, params in bounds.items()}
        self.disabled = frozenset(disabled)

    def get(self, perturbation: str, param: str) -> ParamBound:
        try:
            return self._bounds[perturbation][param]
        except KeyError:
            raise KeyError(f"no calibrated bound for {perturbation}.{param}") from None

    def perturbations(self) -> tuple[str, ...]:
        return tuple(self._bounds)

    def validate(self, registry: Registry) -> None:
        """Check completeness against a registry and hard-range containment."""
        for spec in registry:
            if spec.name not in self._bounds:
                raise ValueError(f"bounds missing perturbation {spec.name!r}")
            for p in spec.params:
                b = self.get(spec.name, p.name)
                if b.lo < p.hard_min or b.hi > p.hard_max:
                    raise ValueError(
                        f"{spec.name}.{p.name}: calibrated [{b.lo}, {b.hi}] exceeds "
                        f"hard range [{p.hard_min}, {p.hard_max}]"
                    )

    @classmethod
    def neutral(cls, registry: Registry) -> "ParamBounds":
        """Degenerate bounds pinning every parameter at neutral (identity chains)."""
        return cls(
            {
                s.name: {p.name: ParamBound(p.neutral, p.neutral, p.neutral) for p in s.params}
                for s in registry
            },
            registry.disabled,
        )

    @classmethod
    def hard(cls, registry: Registry) -> "ParamBounds":
        """Uncalibrated bounds covering each parameter's full hard range."""
        return cls(
            {
                s.name: {p.name: ParamBound(p.neutral, p.hard_min, p.hard_max) for p in s.params}
                for s in registry
            },
            registry.disabled,
        )

    def to_json(self) -> dict:
        return {
            "perturbations": {
                name: {
                    "disabled": name in self.disabled,
                    "params": {
                        pname: {
                            "neutral": b.neutral,
                            "calibrated_min": b.lo,
                            "calibrated_max": b.hi,
                        }
                        for pname, b in params.items()
                    },
                }
                for name, params in self._bounds.items()
            }
        }

    @classmethod
    def from_json(cls, data: dict) -> "ParamBounds":
        bounds: dict[str, dict[str, ParamBound]] = {}
        disabled = []
        for name, entry in data["perturbations"].items():
            if entry.get("disabled"):
                disabled.append(name)
            bounds[name] = {
                pname: ParamBound(p["neutral"], p["calibrated_min"], p["calibrated_max"])
                for pname, p in entry["params"].items()
            }
        return cls(bounds, disabled)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ParamBounds":
        return cls.from_json(json.loads(Path(path).read_text()))
