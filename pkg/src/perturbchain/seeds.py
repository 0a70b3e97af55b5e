"""Deterministic 64-bit seed derivation.

Every stochastic step in the pipeline draws from a generator seeded through
:func:`mix`, so a single run seed fans out into stable, decorrelated
sub-seeds for chain positions, images, grid points, and clusters.
"""
from __future__ import annotations

__all__ = ["mix"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix(seed: int, *tokens: int) -> int:
    """Fold integer tokens into a base seed; returns an unsigned 64-bit seed."""
    x = seed & _MASK
    for t in tokens:
        x = _splitmix64(x ^ (((t & _MASK) + 1) * _GOLDEN & _MASK))
    return _splitmix64(x)
