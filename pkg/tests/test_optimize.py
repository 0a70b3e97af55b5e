import numpy as np
import pytest

from perturbchain.optimize import (
    DEConfig,
    OptimizeError,
    optimize,
    random_search,
    write_trace,
)


def sphere_at(center):
    center = np.asarray(center)

    def objective(x):
        return -float(((x - center) ** 2).sum())

    return objective


def test_config_validation():
    with pytest.raises(ValueError):
        DEConfig(population_size=3)
    with pytest.raises(ValueError):
        DEConfig(weight=0.0)
    with pytest.raises(ValueError):
        DEConfig(weight=2.5)
    with pytest.raises(ValueError):
        DEConfig(population_size=30, budget=10)


def test_constant_objective_consumes_exact_budget():
    cfg = DEConfig(population_size=10, budget=137, seed=1)
    result = optimize(lambda x: 4.25, dim=5, cfg=cfg)
    assert result.best_value == 4.25
    assert result.evaluations == 137
    assert len(result.history) == 137


def test_budget_equal_to_population_is_pure_initialization():
    cfg = DEConfig(population_size=12, budget=12, seed=3)
    calls = []

    def objective(x):
        calls.append(x.copy())
        return float(x.sum())

    result = optimize(objective, dim=4, cfg=cfg)
    assert result.evaluations == 12
    assert len(calls) == 12
    assert result.best_value == max(float(c.sum()) for c in calls)


def test_sphere_convergence_median_over_seeds():
    center = np.full(8, 0.3)
    bests = []
    for seed in range(5):
        cfg = DEConfig(population_size=30, budget=2000, seed=seed)
        bests.append(optimize(sphere_at(center), dim=8, cfg=cfg).best_value)
    assert np.median(bests) >= -1e-3


def test_best_so_far_history_is_monotone():
    for seed in range(3):
        cfg = DEConfig(population_size=8, budget=300, seed=seed)
        result = optimize(sphere_at(np.full(6, 0.7)), dim=6, cfg=cfg)
        best = [row[2] for row in result.history]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
        assert result.best_value == best[-1]
        values = [row[1] for row in result.history]
        assert result.best_value == max(values)


def test_points_stay_in_unit_box():
    seen = []

    def objective(x):
        seen.append(x.copy())
        return float(x[0])

    cfg = DEConfig(population_size=6, budget=200, weight=2.0, seed=9)
    result = optimize(objective, dim=3, cfg=cfg)
    stacked = np.vstack(seen)
    assert stacked.min() >= 0.0 and stacked.max() <= 1.0
    assert result.best_point.min() >= 0.0 and result.best_point.max() <= 1.0


def test_bitwise_reproducibility():
    cfg = DEConfig(population_size=10, budget=400, seed=1234)
    obj = sphere_at(np.full(5, 0.6))
    a = optimize(obj, dim=5, cfg=cfg)
    b = optimize(obj, dim=5, cfg=cfg)
    assert np.array_equal(a.best_point, b.best_point)
    assert a.best_value == b.best_value
    assert a.history == b.history


def test_budget_not_multiple_of_population():
    cfg = DEConfig(population_size=7, budget=100, seed=2)
    result = optimize(sphere_at(np.full(4, 0.5)), dim=4, cfg=cfg)
    assert result.evaluations == 100


def test_nonfinite_objective_raises_with_point_attached():
    def objective(x):
        return float("nan") if x[0] > 0.0 else 0.0

    cfg = DEConfig(population_size=4, budget=40, seed=0)
    with pytest.raises(OptimizeError) as exc_info:
        optimize(objective, dim=2, cfg=cfg)
    assert exc_info.value.point.shape == (2,)


def test_random_search_constant_objective():
    result = random_search(lambda x: 2.0, dim=3, budget=25, seed=5)
    assert result.best_value == 2.0
    assert result.evaluations == 25


def test_random_search_single_evaluation():
    calls = []

    def objective(x):
        calls.append(x.copy())
        return float(x[0])

    result = random_search(objective, dim=4, budget=1, seed=8)
    assert result.evaluations == 1
    assert result.best_value == float(calls[0][0])


def test_de_beats_random_search_on_sphere():
    obj = sphere_at(np.full(8, 0.4))
    de_best, rs_best = [], []
    for seed in range(5):
        cfg = DEConfig(population_size=30, budget=2000, seed=seed)
        de_best.append(optimize(obj, dim=8, cfg=cfg).best_value)
        rs_best.append(random_search(obj, dim=8, budget=2000, seed=seed).best_value)
    assert np.median(de_best) > np.median(rs_best)


def test_trace_csv(tmp_path):
    cfg = DEConfig(population_size=5, budget=30, seed=4)
    result = optimize(sphere_at(np.full(3, 0.5)), dim=3, cfg=cfg)
    path = tmp_path / "trace.csv"
    write_trace(result, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "evaluation,value,best_so_far"
    assert len(lines) == 31
