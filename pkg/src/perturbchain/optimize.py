"""Gradient-free maximization over the unit box.

Differential evolution (best/1 mutation) with two-point crossover: the child
copies a contiguous donor segment between two random cut points and keeps the
target elsewhere. Selection is greedy with ties resolved toward the child so
the population can drift across plateaus. A uniform random search with
identical budget accounting serves as the baseline comparator.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["DEConfig", "OptResult", "OptimizeError", "optimize", "random_search", "write_trace"]


class OptimizeError(RuntimeError):
    """Raised when the objective returns a non-finite value.

    The offending point is attached as ``.point`` and the evaluation history
    up to the failure as ``.history``.
    """

    def __init__(self, message: str, point: np.ndarray, history: list | None = None):
        super().__init__(message)
        self.point = point
        self.history = list(history or [])


@dataclass(frozen=True)
class DEConfig:
    population_size: int = 30
    weight: float = 0.8  # differential weight F
    budget: int = 5000  # max objective evaluations
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0.0 < self.weight <= 2.0:
            raise ValueError("differential weight must lie in (0, 2]")
        if self.budget < self.population_size:
            raise ValueError("budget must cover at least one full population")


@dataclass
class OptResult:
    best_point: np.ndarray
    best_value: float
    evaluations: int
    # one row per evaluation: (evaluation index, value, best so far)
    history: list[tuple[int, float, float]] = field(default_factory=list)


class _Accountant:
    """Evaluation counter with best-so-far tracking and finiteness checks."""

    def __init__(self, objective: Callable[[np.ndarray], float], budget: int):
        self.objective = objective
        self.budget = budget
        self.count = 0
        self.best_value = -np.inf
        self.best_point: np.ndarray | None = None
        self.history: list[tuple[int, float, float]] = []

    @property
    def exhausted(self) -> bool:
        return self.count >= self.budget

    def evaluate(self, point: np.ndarray) -> float:
        value = float(self.objective(point))
        if not np.isfinite(value):
            raise OptimizeError(
                f"objective returned non-finite value {value}", point.copy(), self.history
            )
        self.count += 1
        if value > self.best_value or self.best_point is None:
            self.best_value = value
            self.best_point = point.copy()
        self.history.append((self.count, value, self.best_value))
        return value

    def result(self) -> OptResult:
        assert self.best_point is not None
        return OptResult(self.best_point, self.best_value, self.count, self.history)


def optimize(objective: Callable[[np.ndarray], float], dim: int, cfg: DEConfig) -> OptResult:
    """Maximize `objective` over [0, 1]^dim with two-point differential evolution."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.Generator(np.random.PCG64(cfg.seed & ((1 << 64) - 1)))
    acct = _Accountant(objective, cfg.budget)

    pop = rng.random((cfg.population_size, dim))
    values = np.empty(cfg.population_size)
    for i in range(cfg.population_size):
        values[i] = acct.evaluate(pop[i])

    while not acct.exhausted:
        for i in range(cfg.population_size):
            if acct.exhausted:
                break
            # best/1 donor: the fittest non-target member plus a scaled
            # random difference, everything distinct from the target
            others = np.delete(np.arange(cfg.population_size), i)
            a_idx = others[values[others].argmax()]
            rest = others[others != a_idx]
            b_idx, c_idx = rng.choice(rest, size=2, replace=False)
            donor = np.clip(pop[a_idx] + cfg.weight * (pop[b_idx] - pop[c_idx]), 0.0, 1.0)
            lo, hi = np.sort(rng.integers(0, dim + 1, size=2))
            child = pop[i].copy()
            if lo == hi:
                j = int(rng.integers(0, dim))
                child[j] = donor[j]
            else:
                child[lo:hi] = donor[lo:hi]
            value = acct.evaluate(child)
            if value >= values[i]:
                pop[i] = child
                values[i] = value
    return acct.result()


def random_search(
    objective: Callable[[np.ndarray], float], dim: int, budget: int, seed: int = 0
) -> OptResult:
    """Uniform sampling of the unit box with the same accounting as `optimize`."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))
    acct = _Accountant(objective, budget)
    for _ in range(budget):
        acct.evaluate(rng.random(dim))
    return acct.result()


def write_trace(result: OptResult, path: str | Path) -> None:
    """Dump the evaluation history as CSV for convergence plots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["evaluation", "value", "best_so_far"])
        writer.writerows(result.history)
