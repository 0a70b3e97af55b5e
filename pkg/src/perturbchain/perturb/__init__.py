from .bounds import ParamBound, ParamBounds
from .specs import (
    ParamSpec,
    PerturbationSpec,
    Registry,
    apply,
    default_registry,
    neutral_params,
    round_half_away,
)

__all__ = [
    "ParamBound",
    "ParamBounds",
    "ParamSpec",
    "PerturbationSpec",
    "Registry",
    "apply",
    "default_registry",
    "neutral_params",
    "round_half_away",
]
