import numpy as np
import pytest

from perturbchain.imgcore import (
    DEFAULT_THRESHOLDS,
    Image,
    Mask,
    ProbMap,
    ThresholdSet,
    deterioration,
    iou,
    luminance,
)

from oracles import iou_oracle


def test_types_validate_shape_and_range():
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        Image(np.full((2, 2, 3), 1.5, dtype=np.float32))
    with pytest.raises(ValueError):
        ProbMap(np.full((2, 2), -0.1))
    with pytest.raises(ValueError):
        Mask(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        ThresholdSet((0.9, 0.5))
    with pytest.raises(ValueError):
        ThresholdSet((0.0, 0.5))


def test_types_are_immutable():
    img = Image(np.zeros((2, 2, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_uint8_ingestion_divides_by_255():
    raw = np.array([[[0, 128, 255]]], dtype=np.uint8)
    img = Image.from_uint8(raw)
    assert img.data[0, 0, 0] == 0.0
    assert img.data[0, 0, 2] == 1.0
    assert img.data[0, 0, 1] == np.float32(128) / np.float32(255)


def test_iou_perfect_prediction():
    pred = ProbMap(np.ones((4, 4), dtype=np.float32))
    mask = Mask(np.ones((4, 4), dtype=bool))
    assert iou(pred, mask) == 1.0


def test_iou_midrange_prediction_only_counts_low_threshold():
    # 0.7 exceeds only tau=0.5, so exactly one of three terms is 1
    pred = ProbMap(np.full((4, 4), 0.7, dtype=np.float32))
    mask = Mask(np.ones((4, 4), dtype=bool))
    assert iou(pred, mask) == pytest.approx(1.0 / 3.0)


def test_iou_below_half_contributes_nothing():
    pred = ProbMap(np.full((4, 4), 0.4, dtype=np.float32))
    mask = Mask(np.eye(4, dtype=bool))
    assert iou(pred, mask) == 0.0


def test_iou_empty_union_counts_as_perfect():
    pred = ProbMap(np.zeros((3, 3), dtype=np.float32))
    mask = Mask(np.zeros((3, 3), dtype=bool))
    assert iou(pred, mask) == 1.0


def test_iou_dimension_mismatch():
    pred = ProbMap(np.zeros((3, 3), dtype=np.float32))
    mask = Mask(np.zeros((3, 4), dtype=bool))
    with pytest.raises(ValueError, match="dimension mismatch"):
        iou(pred, mask)


def test_iou_matches_bruteforce_oracle():
    rng = np.random.default_rng(123)
    for _ in range(300):
        h, w = rng.integers(1, 17, size=2)
        pred = ProbMap(rng.random((h, w)).astype(np.float32))
        mask = Mask(rng.random((h, w)) < 0.4)
        assert iou(pred, mask) == iou_oracle(pred.data, mask.data)


def test_iou_permutation_symmetry():
    rng = np.random.default_rng(7)
    pred = rng.random((6, 6)).astype(np.float32)
    mask = rng.random((6, 6)) < 0.5
    perm = rng.permutation(36)
    permuted = iou(
        ProbMap(pred.reshape(-1)[perm].reshape(6, 6)),
        Mask(mask.reshape(-1)[perm].reshape(6, 6)),
    )
    assert permuted == iou(ProbMap(pred), Mask(mask))


def test_iou_monotone_when_adding_correct_pixel():
    rng = np.random.default_rng(42)
    single = ThresholdSet((0.5,))
    for _ in range(50):
        pred = rng.random((5, 5)).astype(np.float32)
        mask = rng.random((5, 5)) < 0.5
        candidates = np.argwhere(mask & ~(pred > 0.5))
        if len(candidates) == 0:
            continue
        before = iou(ProbMap(pred), Mask(mask), single)
        y, x = candidates[0]
        pred2 = pred.copy()
        pred2[y, x] = 0.9
        after = iou(ProbMap(pred2), Mask(mask), single)
        assert after >= before


def test_iou_bounded():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pred = ProbMap(rng.random((4, 4)).astype(np.float32))
        mask = Mask(rng.random((4, 4)) < 0.5)
        assert 0.0 <= iou(pred, mask) <= 1.0


def test_deterioration_identical_lists():
    assert deterioration([0.5, 0.7], [0.5, 0.7]) == 0.0


def test_deterioration_total_failure():
    assert deterioration([1.0, 1.0], [0.0, 0.0]) == 1.0


def test_deterioration_reported_failure_case():
    # a near-perfect model driven to zero IoU
    assert deterioration([0.95, 0.98], [0.0, 0.0]) == pytest.approx(0.965)


def test_deterioration_can_be_negative():
    assert deterioration([0.2], [0.4]) == pytest.approx(-0.2)


def test_deterioration_stays_in_unit_interval():
    rng = np.random.default_rng(31)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        det = deterioration(rng.random(n).tolist(), rng.random(n).tolist())
        assert -1.0 <= det <= 1.0


def test_deterioration_rejects_empty_and_mismatched():
    with pytest.raises(ValueError):
        deterioration([], [])
    with pytest.raises(ValueError):
        deterioration([1.0], [1.0, 0.5])


def test_luminance_weights_sum_to_one():
    gray = np.full((2, 2, 3), 0.6, dtype=np.float32)
    assert luminance(gray) == pytest.approx(0.6, abs=1e-6)
