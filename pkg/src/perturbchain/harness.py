"""End-to-end falsification: per-cluster optimization and reporting.

For each cluster the harness caches the model's baseline IoUs once, then asks
the optimizer to maximize the mean IoU deterioration of decoded perturbation
chains over the cluster's images. The report collects per-cluster best chains
plus a perturbation-usage matrix across clusters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import Dataset, DatasetItem
from .genome import (
    Chain,
    DEFAULT_CHAIN_LENGTH,
    Genome,
    apply_chain,
    chain_from_json,
    chain_to_json,
    decode,
    genome_dim,
)
from .imgcore import DEFAULT_THRESHOLDS, ThresholdSet, deterioration, iou
from .optimize import DEConfig, OptResult, optimize, write_trace
from .perturb import ParamBounds, Registry
from .seeds import mix

__all__ = [
    "ClusterReport",
    "FalsifyReport",
    "build_objective",
    "falsify_cluster",
    "run_campaign",
    "write_report",
    "load_report",
    "render_markdown",
    "Falsifier",
]


@dataclass(frozen=True, eq=False)
class ClusterReport:
    cluster_id: int
    image_ids: tuple[str, ...]
    evaluated_ids: tuple[str, ...]
    baseline_iou_mean: float
    best_deterioration: float
    best_chain: Chain | None
    evaluations: int
    disabled: tuple[str, ...]
    status: str = "ok"
    error: str = ""
    history: tuple[tuple[int, float, float], ...] = ()

    @property
    def size(self) -> int:
        return len(self.image_ids)


@dataclass(frozen=True, eq=False)
class FalsifyReport:
    clusters: tuple[ClusterReport, ...]
    usage: dict[str, dict[int, int | None]]  # perturbation -> cluster -> 1-based position
    config: dict


def _subsample(items: Sequence[DatasetItem], limit: int | None, seed: int) -> list[DatasetItem]:
    if limit is None or limit >= len(items):
        return list(items)
    rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))
    chosen = sorted(rng.choice(len(items), size=limit, replace=False).tolist())
    return [items[i] for i in chosen]


def build_objective(
    items: Sequence[DatasetItem],
    model,
    registry: Registry,
    bounds: ParamBounds,
    k: int = DEFAULT_CHAIN_LENGTH,
    chain_seed: int = 0,
    taus: ThresholdSet = DEFAULT_THRESHOLDS,
    cache_baselines: bool = True,
) -> tuple[Callable[[np.ndarray], float], list[float]]:
    """Objective mapping a genome vector to mean IoU deterioration.

    Baseline IoUs are computed once up front; geometric chain members
    co-transform the ground-truth mask, so the perturbed term compares the
    model against the transformed labels.
    """
    baselines = [iou(model.predict(it.image), it.mask, taus) for it in items]

    def objective(vector: np.ndarray) -> float:
        base = baselines if cache_baselines else [
            iou(model.predict(it.image), it.mask, taus) for it in items
        ]
        chain = decode(Genome(vector, seed=chain_seed), registry, bounds, k)
        perturbed = []
        for i, item in enumerate(items):
            p_img, p_mask = apply_chain(chain, item.image, item.mask, mix(chain_seed, i))
            perturbed.append(iou(model.predict(p_img), p_mask, taus))
        return deterioration(base, perturbed)

    return objective, baselines


def falsify_cluster(
    cluster_id: int,
    items: Sequence[DatasetItem],
    model,
    registry: Registry,
    bounds: ParamBounds,
    de_cfg: DEConfig,
    k: int = DEFAULT_CHAIN_LENGTH,
    chain_seed: int = 0,
    subsample: int | None = None,
    subsample_seed: int = 0,
    taus: ThresholdSet = DEFAULT_THRESHOLDS,
) -> ClusterReport:
    """Optimize one cluster; failures are reported, not raised."""
    evaluated = _subsample(items, subsample, subsample_seed)
    try:
        objective, baselines = build_objective(
            evaluated, model, registry, bounds, k, chain_seed, taus
        )
        result = optimize(objective, genome_dim(registry), de_cfg)
        best_chain = decode(Genome(result.best_point, seed=chain_seed), registry, bounds, k)
        return ClusterReport(
            cluster_id=cluster_id,
            image_ids=tuple(it.id for it in items),
            evaluated_ids=tuple(it.id for it in evaluated),
            baseline_iou_mean=sum(baselines) / len(baselines),
            best_deterioration=result.best_value,
            best_chain=best_chain,
            evaluations=result.evaluations,
            disabled=tuple(sorted(registry.disabled)),
            history=tuple(result.history),
        )
    except Exception as exc:  # cluster failures are isolated, campaign continues
        partial = tuple(getattr(exc, "history", ()))
        return ClusterReport(
            cluster_id=cluster_id,
            image_ids=tuple(it.id for it in items),
            evaluated_ids=tuple(it.id for it in evaluated),
            baseline_iou_mean=float("nan"),
            best_deterioration=float("nan"),
            best_chain=None,
            evaluations=len(partial),
            disabled=tuple(sorted(registry.disabled)),
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
            history=partial,
        )


def usage_matrix(
    registry: Registry, clusters: Sequence[ClusterReport]
) -> dict[str, dict[int, int | None]]:
    """Chain position (1-based) of each perturbation per cluster, or None."""
    usage: dict[str, dict[int, int | None]] = {s.name: {} for s in registry}
    for report in clusters:
        positions = {}
        if report.best_chain is not None:
            positions = {link.name: pos + 1 for pos, link in enumerate(report.best_chain)}
        for spec in registry:
            usage[spec.name][report.cluster_id] = positions.get(spec.name)
    return usage


def run_campaign(
    dataset: Dataset,
    model,
    registry: Registry,
    bounds: ParamBounds,
    assignment: Mapping[str, int] | None,
    de_cfg: DEConfig,
    k: int = DEFAULT_CHAIN_LENGTH,
    disabled: Mapping[str, Sequence[int] | None] | None = None,
    subsample: int | None = None,
    seed: int = 0,
    config_echo: dict | None = None,
) -> FalsifyReport:
    """Run one falsification per cluster and assemble the report.

    `assignment` maps image id to cluster id (None puts everything in cluster
    0). `disabled` maps perturbation name to the cluster ids it is disabled
    for, or None for all clusters.
    """
    if assignment is None:
        assignment = {item.id: 0 for item in dataset}
    groups: dict[int, list[DatasetItem]] = {}
    for item in dataset:
        if item.id not in assignment:
            raise ValueError(f"image {item.id!r} missing from cluster assignment")
        groups.setdefault(int(assignment[item.id]), []).append(item)

    disabled = dict(disabled or {})
    reports = []
    for cluster_id in sorted(groups):
        cluster_disabled = set(registry.disabled)
        for name, cluster_ids in disabled.items():
            if cluster_ids is None or cluster_id in cluster_ids:
                cluster_disabled.add(name)
        cluster_registry = registry.with_disabled(cluster_disabled)
        reports.append(
            falsify_cluster(
                cluster_id,
                groups[cluster_id],
                model,
                cluster_registry,
                bounds,
                replace(de_cfg, seed=mix(seed, cluster_id, 0)),
                k=k,
                chain_seed=mix(seed, cluster_id, 1),
                subsample=subsample,
                subsample_seed=mix(seed, cluster_id, 2),
            )
        )
    return FalsifyReport(
        clusters=tuple(reports),
        usage=usage_matrix(registry, reports),
        config=dict(config_echo or {}),
    )


# --- persistence --------------------------------------------------------------

def _not_nan(value: float) -> float | None:
    return None if value != value else value


def report_to_json(report: FalsifyReport) -> dict:
    """Strict-JSON representation; failed clusters carry null metrics."""
    return {
        "config": report.config,
        "clusters": [
            {
                "id": c.cluster_id,
                "size": c.size,
                "image_ids": list(c.image_ids),
                "evaluated_ids": list(c.evaluated_ids),
                "baseline_iou_mean": _not_nan(c.baseline_iou_mean),
                "best_deterioration": _not_nan(c.best_deterioration),
                "best_chain": chain_to_json(c.best_chain) if c.best_chain else None,
                "evaluations": c.evaluations,
                "disabled": list(c.disabled),
                "status": c.status,
                "error": c.error,
            }
            for c in report.clusters
        ],
        "usage_matrix": {
            name: {str(cid): pos for cid, pos in by_cluster.items()}
            for name, by_cluster in report.usage.items()
        },
    }


def write_report(report: FalsifyReport, out_dir: str | Path) -> Path:
    """Write report.json, table.md, and per-cluster convergence traces."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(
        json.dumps(report_to_json(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    )
    (out_dir / "table.md").write_text(render_markdown(report))
    for c in report.clusters:
        if c.history:
            write_trace(
                OptResult(np.zeros(1), c.best_deterioration, c.evaluations, list(c.history)),
                out_dir / f"trace_cluster_{c.cluster_id}.csv",
            )
    return path


def load_report(report_dir: str | Path, registry: Registry) -> FalsifyReport:
    data = json.loads((Path(report_dir) / "report.json").read_text())
    clusters = tuple(
        ClusterReport(
            cluster_id=c["id"],
            image_ids=tuple(c["image_ids"]),
            evaluated_ids=tuple(c["evaluated_ids"]),
            baseline_iou_mean=float("nan") if c["baseline_iou_mean"] is None else c["baseline_iou_mean"],
            best_deterioration=float("nan") if c["best_deterioration"] is None else c["best_deterioration"],
            best_chain=chain_from_json(c["best_chain"], registry) if c["best_chain"] else None,
            evaluations=c["evaluations"],
            disabled=tuple(c["disabled"]),
            status=c["status"],
            error=c["error"],
        )
        for c in data["clusters"]
    )
    usage = {
        name: {int(cid): pos for cid, pos in by_cluster.items()}
        for name, by_cluster in data["usage_matrix"].items()
    }
    return FalsifyReport(clusters=clusters, usage=usage, config=data["config"])


def render_markdown(report: FalsifyReport) -> str:
    lines = ["# Falsification report", "", "## Clusters", ""]
    lines.append("| ID | Size | Baseline IoU | Best deterioration | Best chain |")
    lines.append("|---:|-----:|-------------:|-------------------:|------------|")
    for c in report.clusters:
        if c.status != "ok":
            lines.append(f"| {c.cluster_id} | {c.size} | - | - | FAILED: {c.error} |")
            continue
        chain = " -> ".join(c.best_chain.names()) if c.best_chain else "-"
        note = f" (disabled: {', '.join(c.disabled)})" if c.disabled else ""
        lines.append(
            f"| {c.cluster_id} | {c.size} | {c.baseline_iou_mean:.3f} | "
            f"{c.best_deterioration:.3f} | {chain}{note} |"
        )
    lines += ["", "## Perturbation usage (chain position per cluster)", ""]
    cluster_ids = [c.cluster_id for c in report.clusters]
    lines.append("| Perturbation | " + " | ".join(str(c) for c in cluster_ids) + " |")
    lines.append("|---|" + "---|" * len(cluster_ids))
    for name, by_cluster in report.usage.items():
        cells = [str(by_cluster.get(cid)) if by_cluster.get(cid) else "." for cid in cluster_ids]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


class Falsifier(BaseEstimator):
    """Estimator facade over `run_campaign`: fit(dataset) learns `report_`."""

    def __init__(
        self,
        budget: int = 5000,
        k: int = DEFAULT_CHAIN_LENGTH,
        population_size: int = 30,
        weight: float = 0.8,
        subsample: int | None = None,
        seed: int = 0,
    ):
        self.budget = budget
        self.k = k
        self.population_size = population_size
        self.weight = weight
        self.subsample = subsample
        self.seed = seed

    def fit(
        self,
        X: Dataset,
        y=None,
        *,
        model,
        registry: Registry,
        bounds: ParamBounds,
        assignment: Mapping[str, int] | None = None,
        disabled: Mapping[str, Sequence[int] | None] | None = None,
    ) -> "Falsifier":
        de_cfg = DEConfig(
            population_size=self.population_size,
            weight=self.weight,
            budget=self.budget,
            seed=self.seed,
        )
        self.report_ = run_campaign(
            X,
            model,
            registry,
            bounds,
            assignment,
            de_cfg,
            k=self.k,
            disabled=disabled,
            subsample=self.subsample,
            seed=self.seed,
        )
        return self
