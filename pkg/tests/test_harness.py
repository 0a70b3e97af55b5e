import json

import numpy as np
import pytest

from perturbchain.dataset import generate_synthetic, SyntheticStyle
from perturbchain.genome import Genome, apply_chain, genome_dim
from perturbchain.harness import (
    Falsifier,
    build_objective,
    falsify_cluster,
    load_report,
    render_markdown,
    run_campaign,
    usage_matrix,
    write_report,
)
from perturbchain.imgcore import iou
from perturbchain.models import ReferenceModel
from perturbchain.optimize import DEConfig
from perturbchain.perturb import ParamBounds
from perturbchain.seeds import mix


@pytest.fixture(scope="module")
def tiny_cfg():
    return DEConfig(population_size=6, budget=48, seed=3)


@pytest.fixture(scope="module")
def tiny_dataset():
    return generate_synthetic(6, seed=5, width=48, height=32)


@pytest.fixture(scope="module")
def loose_bounds(registry):
    return ParamBounds.hard(registry)


def test_identity_bounds_give_zero_deterioration(registry, tiny_dataset, tiny_cfg):
    bounds = ParamBounds.neutral(registry)
    report = falsify_cluster(
        0, list(tiny_dataset), ReferenceModel(), registry, bounds, tiny_cfg
    )
    assert report.status == "ok"
    assert report.best_deterioration == 0.0


def test_objective_baseline_cache_equals_fresh_computation(registry, tiny_dataset, loose_bounds):
    items = list(tiny_dataset)
    model = ReferenceModel()
    cached, _ = build_objective(items, model, registry, loose_bounds, chain_seed=11)
    fresh, _ = build_objective(
        items, model, registry, loose_bounds, chain_seed=11, cache_baselines=False
    )
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.random(genome_dim(registry))
        assert cached(v) == fresh(v)


def test_reported_chain_reproduces_reported_deterioration(registry, tiny_dataset, loose_bounds, tiny_cfg):
    items = list(tiny_dataset)
    model = ReferenceModel()
    chain_seed = mix(99, 0, 1)
    report = falsify_cluster(
        0, items, model, registry, loose_bounds, tiny_cfg, chain_seed=chain_seed
    )
    # re-apply the reported chain from scratch
    baselines = [iou(model.predict(it.image), it.mask) for it in items]
    perturbed = []
    for i, it in enumerate(items):
        p_img, p_mask = apply_chain(report.best_chain, it.image, it.mask, mix(chain_seed, i))
        perturbed.append(iou(model.predict(p_img), p_mask))
    recomputed = sum(b - p for b, p in zip(baselines, perturbed)) / len(items)
    assert recomputed == report.best_deterioration


def test_falsify_cluster_subsample_is_deterministic(registry, tiny_dataset, loose_bounds, tiny_cfg):
    items = list(tiny_dataset)
    a = falsify_cluster(
        0, items, ReferenceModel(), registry, loose_bounds, tiny_cfg, subsample=3, subsample_seed=4
    )
    b = falsify_cluster(
        0, items, ReferenceModel(), registry, loose_bounds, tiny_cfg, subsample=3, subsample_seed=4
    )
    assert a.evaluated_ids == b.evaluated_ids
    assert len(a.evaluated_ids) == 3
    assert a.best_deterioration == b.best_deterioration
    assert set(a.evaluated_ids) < set(a.image_ids)


def test_cluster_failure_is_isolated(registry, tiny_dataset, loose_bounds, tiny_cfg):
    class DyingModel:
        def __init__(self):
            self.calls = 0

        def predict(self, img):
            self.calls += 1
            if self.calls > 10:
                raise RuntimeError("connection lost")
            return ReferenceModel().predict(img)

    report = falsify_cluster(
        0, list(tiny_dataset), DyingModel(), registry, loose_bounds, tiny_cfg
    )
    assert report.status == "failed"
    assert "connection lost" in report.error
    assert report.best_chain is None


def test_failed_objective_keeps_partial_trace(tiny_cfg):
    from perturbchain.optimize import OptimizeError, optimize

    calls = {"n": 0}

    def objective(vec):
        calls["n"] += 1
        return float("nan") if calls["n"] > 10 else float(vec[0])

    with pytest.raises(OptimizeError) as err:
        optimize(objective, 5, tiny_cfg)
    assert len(err.value.history) == 10
    best = [row[2] for row in err.value.history]
    assert all(b >= a for a, b in zip(best, best[1:]))


def test_campaign_single_cluster_and_report_roundtrip(registry, tiny_dataset, loose_bounds, tiny_cfg, tmp_path):
    report = run_campaign(
        tiny_dataset, ReferenceModel(), registry, loose_bounds, None, tiny_cfg, seed=1,
        config_echo={"budget": tiny_cfg.budget},
    )
    assert len(report.clusters) == 1
    assert report.clusters[0].cluster_id == 0
    assert report.clusters[0].size == len(tiny_dataset)

    out = write_report(report, tmp_path / "out")
    assert out.exists()
    loaded = load_report(tmp_path / "out", registry)
    assert loaded.clusters[0].best_deterioration == report.clusters[0].best_deterioration
    assert loaded.clusters[0].best_chain.names() == report.clusters[0].best_chain.names()
    assert loaded.config == {"budget": tiny_cfg.budget}
    md = render_markdown(loaded)
    assert "| 0 |" in md and "Perturbation usage" in md
    assert (tmp_path / "out" / "trace_cluster_0.csv").exists()


def test_campaign_clusters_get_distinct_chains(registry, loose_bounds, tiny_cfg):
    # three visually different groups: dark, bright, textured
    dark = generate_synthetic(4, seed=1, width=48, height=32, style=SyntheticStyle(background=0.10), id_prefix="dark")
    bright = generate_synthetic(4, seed=2, width=48, height=32, style=SyntheticStyle(background=0.50), id_prefix="bright")
    noisy = generate_synthetic(4, seed=3, width=48, height=32, style=SyntheticStyle(noise_amplitude=0.14), id_prefix="noisy")
    from perturbchain.dataset import Dataset

    dataset = Dataset(tuple(list(dark) + list(bright) + list(noisy)))
    assignment = {}
    for it in dark:
        assignment[it.id] = 0
    for it in bright:
        assignment[it.id] = 1
    for it in noisy:
        assignment[it.id] = 2
    cfg = DEConfig(population_size=8, budget=200, seed=5)
    report = run_campaign(dataset, ReferenceModel(), registry, loose_bounds, assignment, cfg, seed=7)
    assert [c.cluster_id for c in report.clusters] == [0, 1, 2]
    chains = [c.best_chain.names() for c in report.clusters]
    assert len(set(chains)) > 1  # cluster-specific chains differ


def test_campaign_per_cluster_disable(registry, tiny_dataset, loose_bounds, tiny_cfg):
    assignment = {it.id: i % 2 for i, it in enumerate(tiny_dataset)}
    report = run_campaign(
        tiny_dataset,
        ReferenceModel(),
        registry,
        loose_bounds,
        assignment,
        tiny_cfg,
        disabled={"brightness": [1], "fog": None},
        seed=2,
    )
    by_id = {c.cluster_id: c for c in report.clusters}
    assert "brightness" not in by_id[1].best_chain.names()
    assert "brightness" in by_id[0].disabled or "brightness" not in by_id[0].disabled
    for c in report.clusters:
        assert "fog" not in c.best_chain.names()
        for name in c.disabled:
            assert name not in c.best_chain.names()
    assert by_id[1].disabled == ("brightness", "fog")
    assert by_id[0].disabled == ("fog",)


def test_campaign_isolates_failing_cluster(registry, loose_bounds, tiny_cfg, tmp_path):
    # the model dies on wide frames; the narrow cluster must still complete
    narrow = generate_synthetic(4, seed=11, width=48, height=32, id_prefix="narrow")
    wide = generate_synthetic(4, seed=12, width=64, height=32, id_prefix="wide")
    from perturbchain.dataset import Dataset

    dataset = Dataset(tuple(list(narrow) + list(wide)))
    assignment = {it.id: 0 for it in narrow} | {it.id: 1 for it in wide}

    class PickyModel:
        def predict(self, img):
            if img.width > 48:
                raise RuntimeError("sensor overload")
            return ReferenceModel().predict(img)

    report = run_campaign(
        dataset, PickyModel(), registry, loose_bounds, assignment, tiny_cfg, seed=3
    )
    by_id = {c.cluster_id: c for c in report.clusters}
    assert by_id[0].status == "ok"
    assert by_id[1].status == "failed"
    assert "sensor overload" in by_id[1].error

    # the failed row must survive persistence and rendering
    write_report(report, tmp_path / "out")
    loaded = load_report(tmp_path / "out", registry)
    assert {c.cluster_id: c.status for c in loaded.clusters} == {0: "ok", 1: "failed"}
    assert loaded.clusters[1].best_chain is None
    md = render_markdown(loaded)
    assert "FAILED: RuntimeError: sensor overload" in md


def test_usage_matrix_positions(registry, tiny_dataset, loose_bounds, tiny_cfg):
    report = run_campaign(
        tiny_dataset, ReferenceModel(), registry, loose_bounds, None, tiny_cfg, seed=3
    )
    usage = report.usage
    assert set(usage) == {s.name for s in registry}
    chain = report.clusters[0].best_chain
    for pos, link in enumerate(chain, start=1):
        assert usage[link.name][0] == pos
    absent = {s.name for s in registry} - set(chain.names())
    for name in absent:
        assert usage[name][0] is None


def test_missing_assignment_raises(registry, tiny_dataset, loose_bounds, tiny_cfg):
    with pytest.raises(ValueError, match="missing from cluster assignment"):
        run_campaign(
            tiny_dataset,
            ReferenceModel(),
            registry,
            loose_bounds,
            {"wrong_id": 0},
            tiny_cfg,
        )


def test_falsifier_estimator(registry, tiny_dataset, loose_bounds):
    f = Falsifier(budget=48, population_size=6, seed=1)
    f.fit(tiny_dataset, model=ReferenceModel(), registry=registry, bounds=loose_bounds)
    assert len(f.report_.clusters) == 1
    assert f.get_params()["budget"] == 48
