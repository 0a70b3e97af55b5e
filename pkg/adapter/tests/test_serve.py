import io
import struct
import subprocess
import sys

import numpy as np
import pytest

from model_adapter import frames
from model_adapter.models import constant, echo_rect, resolve_model
from model_adapter.serve import AdapterConfig, serve


def run_session(requests: bytes, model="echo_rect") -> tuple[int, bytes, str]:
    stdin = io.BytesIO(requests)
    stdout = io.BytesIO()
    stderr = io.StringIO()
    code = serve(AdapterConfig(model=model), stdin, stdout, stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def handshake(version=1) -> bytes:
    return b"FALH" + struct.pack("<H", version)


def request(img: np.ndarray) -> bytes:
    h, w = img.shape[:2]
    return b"FALQ" + struct.pack("<IIB", w, h, 3) + img.tobytes()


def test_echo_rect_8x8_has_sixteen_ones():
    probs = echo_rect(np.zeros((8, 8, 3), dtype=np.float32))
    assert probs.sum() == 16.0
    assert probs[2:6, 2:6].min() == 1.0


def test_echo_rect_ignores_pixel_content():
    rng = np.random.default_rng(1)
    a = echo_rect(rng.random((10, 14, 3)).astype(np.float32))
    b = echo_rect(rng.random((10, 14, 3)).astype(np.float32))
    assert np.array_equal(a, b)


def test_constant_model_and_validation():
    probs = constant(0.5)(np.zeros((3, 4, 3), dtype=np.float32))
    assert np.all(probs == 0.5)
    with pytest.raises(ValueError):
        constant(1.5)


def test_resolve_model_module_path():
    fn = resolve_model("model_adapter.models:echo_rect")
    assert fn is echo_rect
    with pytest.raises(ImportError, match="pip install"):
        resolve_model("no_such_module_anywhere:thing")
    with pytest.raises(ValueError):
        resolve_model("model_adapter.models:missing_attr")


def test_serve_clean_session():
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    code, out, err = run_session(handshake() + request(img) + request(img))
    assert code == 0, err
    stream = io.BytesIO(out)
    assert frames.read_handshake(stream) == 1
    for _ in range(2):
        header = stream.read(12)
        assert header[:4] == b"FALR"
        w, h = struct.unpack("<II", header[4:12])
        probs = np.frombuffer(stream.read(w * h * 4), dtype="<f4").reshape(h, w)
        assert probs.sum() == 16.0
    assert stream.read() == b""


def test_serve_version_mismatch_is_fatal_and_silent():
    code, out, err = run_session(handshake(version=7))
    assert code == 2
    assert out == b""
    assert "version mismatch" in err


def test_serve_bad_handshake_magic():
    code, out, err = run_session(b"NOPE\x01\x00")
    assert code == 2
    assert out == b""


def test_serve_malformed_frame_stops_output():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    good = handshake() + request(img)
    code, out, err = run_session(good + b"JUNKJUNK")
    assert code == 2
    assert "magic" in err
    # exactly one response was written before the malformed frame
    stream = io.BytesIO(out)
    frames.read_handshake(stream)
    stream.read(12 + 64)
    assert stream.read() == b""


def test_serve_constant_value_via_subprocess():
    img = np.zeros((3, 5, 3), dtype=np.uint8)
    proc = subprocess.run(
        [sys.executable, "-m", "model_adapter", "serve", "--model", "constant:0.25"],
        input=handshake() + request(img),
        capture_output=True,
        timeout=30,
    )
    assert proc.returncode == 0, proc.stderr
    stream = io.BytesIO(proc.stdout)
    assert frames.read_handshake(stream) == 1
    header = stream.read(12)
    assert struct.unpack("<II", header[4:12]) == (5, 3)
    probs = np.frombuffer(stream.read(60), dtype="<f4")
    assert np.all(probs == 0.25)
