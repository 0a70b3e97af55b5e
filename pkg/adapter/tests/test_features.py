import numpy as np
import pytest

from model_adapter.dataio import read_manifest, read_ppm
from model_adapter.features import export_features, resolve_extractor


def mean_rgb(img):
    """Tiny stand-in extractor used by the tests."""
    return img.reshape(-1, 3).mean(axis=0)


def write_ppm(path, arr):
    h, w = arr.shape[:2]
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + arr.tobytes())


@pytest.fixture
def manifest(tmp_path):
    rng = np.random.default_rng(4)
    rows = ["image_id,image_path,mask_path"]
    for i in range(3):
        arr = rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8)
        write_ppm(tmp_path / f"img{i}.ppm", arr)
        (tmp_path / f"img{i}.rle").write_text("8 6\n")
        rows.append(f"img{i},img{i}.ppm,img{i}.rle")
    path = tmp_path / "manifest.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_read_ppm_and_manifest(manifest, tmp_path):
    rows = read_manifest(manifest)
    assert [r[0] for r in rows] == ["img0", "img1", "img2"]
    img = read_ppm(rows[0][1])
    assert img.shape == (6, 8, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_export_features_three_rows(manifest, tmp_path):
    out = tmp_path / "features.csv"
    count = export_features(manifest, out, mean_rgb)
    assert count == 3
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "image_id,f0,f1,f2"
    assert len(lines) == 4
    assert [l.split(",")[0] for l in lines[1:]] == ["img0", "img1", "img2"]


def test_export_features_rerun_is_bytewise_identical(manifest, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    export_features(manifest, a, mean_rgb)
    export_features(manifest, b, mean_rgb)
    assert a.read_bytes() == b.read_bytes()


def test_export_features_rejects_ragged_extractor(manifest, tmp_path):
    state = {"n": 2}

    def ragged(img):
        state["n"] += 1
        return np.zeros(state["n"])

    with pytest.raises(ValueError, match="inconsistent"):
        export_features(manifest, tmp_path / "x.csv", ragged)


def test_resolve_extractor_module_path():
    fn = resolve_extractor("model_adapter.models:echo_rect")
    assert callable(fn)


def test_default_extractor_gives_install_hint_if_torch_missing():
    try:
        import torchvision  # noqa: F401

        pytest.skip("torchvision installed; hint path not reachable")
    except ImportError:
        with pytest.raises(ImportError, match="neural"):
            resolve_extractor("efficientnet_b4")
