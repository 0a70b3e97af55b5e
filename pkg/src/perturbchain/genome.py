"""Fixed-dimension chain encoding over the unit box.

A genome is one point in [0, 1]^d with d = 12 selection keys followed by the
concatenated normalized parameters of all registered perturbations. Ranking
the keys picks an ordered subset of perturbations (random-key decoding), so
any continuous gradient-free optimizer can search chain structure and
parameters jointly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .imgcore import Image, Mask
from .perturb import ParamBounds, PerturbationSpec, Registry, apply
from .seeds import mix

__all__ = [
    "Genome",
    "ChainLink",
    "Chain",
    "DEFAULT_CHAIN_LENGTH",
    "genome_dim",
    "param_offsets",
    "decode",
    "apply_chain",
    "chain_to_json",
    "chain_from_json",
    "save_chain",
    "load_chain",
]

DEFAULT_CHAIN_LENGTH = 6
SELECTION_KEYS = 12


def genome_dim(registry: Registry) -> int:
    return SELECTION_KEYS + registry.param_count


def param_offsets(registry: Registry) -> list[int]:
    """Start index of each perturbation's parameter block within the genome."""
    offsets = []
    pos = SELECTION_KEYS
    for spec in registry:
        offsets.append(pos)
        pos += len(spec.params)
    return offsets


@dataclass(frozen=True, eq=False)
class Genome:
    """A point in the unit box plus the seed that fixes stochastic textures."""

    vector: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or v.size < SELECTION_KEYS:
            raise ValueError(f"genome vector must be 1-D with >= {SELECTION_KEYS} entries")
        if not np.isfinite(v).all():
            raise ValueError("genome vector contains non-finite values")
        if float(v.min()) < 0.0 or float(v.max()) > 1.0:
            raise ValueError("genome coordinates must lie in [0, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    @property
    def selection_keys(self) -> np.ndarray:
        return self.vector[:SELECTION_KEYS]


@dataclass(frozen=True)
class ChainLink:
    """One decoded chain member: a perturbation and its concrete parameters."""

    spec: PerturbationSpec
    values: tuple[float, ...]

    @property
    def name(self) -> str:
        return self.spec.name

    def params_by_name(self) -> dict[str, float]:
        return {p.name: v for p, v in zip(self.spec.params, self.values)}


@dataclass(frozen=True)
class Chain:
    """Ordered perturbation chain with distinct members."""

    links: tuple[ChainLink, ...]

    def __post_init__(self) -> None:
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise ValueError("chain members must be distinct perturbations")

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self):
        return iter(self.links)

    def names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.links)


def decode(
    genome: Genome,
    registry: Registry,
    bounds: ParamBounds,
    k: int = DEFAULT_CHAIN_LENGTH,
) -> Chain:
    """Random-key decoding of a genome into a K-member chain.

    Enabled perturbations are ranked by their selection key, descending, with
    ties broken by registry position; the top K form the chain in rank order.
    Each selected perturbation's normalized parameters are mapped affinely
    onto its calibrated range.
    """
    if genome.vector.size != genome_dim(registry):
        raise ValueError(
            f"genome dimension {genome.vector.size} != expected {genome_dim(registry)}"
        )
    enabled = [i for i, s in enumerate(registry) if s.name not in registry.disabled]
    if k > len(enabled):
        raise ValueError(f"chain length {k} exceeds {len(enabled)} enabled perturbations")
    keys = genome.selection_keys
    ranked = sorted(enabled, key=lambda i: (-keys[i], i))[:k]
    offsets = param_offsets(registry)
    links = []
    for idx in ranked:
        spec = registry.specs[idx]
        block = genome.vector[offsets[idx] : offsets[idx] + len(spec.params)]
        values = []
        for p, u in zip(spec.params, block):
            b = bounds.get(spec.name, p.name)
            values.append(float(u * b.hi + (1.0 - u) * b.lo))
        links.append(ChainLink(spec, tuple(values)))
    return Chain(tuple(links))


def apply_chain(chain: Chain, img: Image, mask: Mask, seed: int) -> tuple[Image, Mask]:
    """Apply chain members left to right, each with a position-derived sub-seed."""
    for position, link in enumerate(chain):
        img, mask = apply(link.spec, link.values, img, mask, mix(seed, position))
    return img, mask


def chain_to_json(chain: Chain) -> list[dict]:
    return [{"name": l.name, "params": l.params_by_name()} for l in chain]


def chain_from_json(data: Sequence[dict], registry: Registry) -> Chain:
    links = []
    for entry in data:
        spec = registry.get(entry["name"])
        values = tuple(float(entry["params"][p.name]) for p in spec.params)
        links.append(ChainLink(spec, values))
    return Chain(tuple(links))


def save_chain(chain: Chain, path: str | Path) -> None:
    Path(path).write_text(json.dumps(chain_to_json(chain), indent=2) + "\n")


def load_chain(path: str | Path, registry: Registry) -> Chain:
    return chain_from_json(json.loads(Path(path).read_text()), registry)
