"""Model-under-test handles: the in-process reference segmenter and the
subprocess wire-protocol client.

Both expose ``predict(Image) -> ProbMap`` and ``close()``; the harness treats
them uniformly as black boxes.
"""
from __future__ import annotations

import collections
import os
import select
import shlex
import struct
import subprocess
import threading
import time

import numpy as np
from scipy import ndimage

from . import protocol
from .imgcore import Image, ProbMap, luminance

__all__ = ["ModelError", "ReferenceModel", "SubprocessModel", "open_model"]


class ModelError(RuntimeError):
    """Model process failure or wire-protocol violation."""


class ReferenceModel:
    """Deterministic band detector used as the default system under test.

    Luminance is 3x3 box-filtered, then mapped through a clamped cubic
    smoothstep between the two activation thresholds. The response degrades
    plausibly under blur, noise, fog, and brightness shifts.
    """

    T0 = 0.55
    T1 = 0.75

    def predict(self, img: Image) -> ProbMap:
        lum = luminance(img.data)
        smooth = ndimage.uniform_filter(lum, size=3, mode="nearest")
        u = np.clip((smooth - self.T0) / (self.T1 - self.T0), 0.0, 1.0)
        return ProbMap(u * u * (3.0 - 2.0 * u))

    def close(self) -> None:
        pass

    def __enter__(self) -> "ReferenceModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class SubprocessModel:
    """Client side of the framed stdin/stdout protocol.

    The channel is synchronous: one request in flight at a time. Reads and
    writes are guarded by a per-request deadline so a wedged model process
    cannot hang the harness.
    """

    def __init__(self, command: str | list[str], timeout: float = 30.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.timeout = timeout
        self._stderr_tail: collections.deque[str] = collections.deque(maxlen=50)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise ModelError(f"cannot start model process {self.command}: {exc}") from exc
        os.set_blocking(self._proc.stdout.fileno(), False)
        os.set_blocking(self._proc.stdin.fileno(), False)
        self._drainer = threading.Thread(target=self._drain_stderr, daemon=True)
        self._drainer.start()
        self._handshake()

    # --- plumbing ---

    def _drain_stderr(self) -> None:
        try:
            for line in self._proc.stderr:
                self._stderr_tail.append(line.decode("utf-8", "replace").rstrip())
        except ValueError:
            pass  # stream closed during shutdown

    def _diag(self) -> str:
        rc = self._proc.poll()
        parts = [f"command={self.command}"]
        if rc is not None:
            parts.append(f"exit_code={rc}")
        if self._stderr_tail:
            parts.append("stderr tail:\n  " + "\n  ".join(self._stderr_tail))
        return "; ".join(parts)

    def _fail(self, reason: str) -> ModelError:
        self.close()
        return ModelError(f"{reason} ({self._diag()})")

    def _write_all(self, data: bytes, deadline: float) -> None:
        fd = self._proc.stdin.fileno()
        view = memoryview(data)
        while view:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise self._fail(f"timeout writing request after {self.timeout}s")
            _, writable, _ = select.select([], [fd], [], remaining)
            if not writable:
                continue
            try:
                sent = os.write(fd, view[: 1 << 16])
            except BrokenPipeError:
                raise self._fail("model process closed stdin") from None
            view = view[sent:]

    def _read_exact(self, n: int, deadline: float, context: str) -> bytes:
        fd = self._proc.stdout.fileno()
        chunks = []
        got = 0
        while got < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise self._fail(f"timeout after {self.timeout}s while reading {context}")
            readable, _, _ = select.select([fd], [], [], remaining)
            if not readable:
                continue
            chunk = os.read(fd, n - got)
            if not chunk:
                raise self._fail(f"model process closed stdout while sending {context}")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def _handshake(self) -> None:
        deadline = time.monotonic() + self.timeout
        self._write_all(protocol.pack_handshake(), deadline)
        reply = self._read_exact(protocol.HANDSHAKE_SIZE, deadline, "handshake")
        magic, version = reply[:4], struct.unpack("<H", reply[4:6])[0]
        if magic != protocol.MAGIC_HELLO:
            raise self._fail(f"bad handshake magic {magic!r}")
        if version != protocol.PROTOCOL_VERSION:
            raise self._fail(
                f"protocol version mismatch: harness {protocol.PROTOCOL_VERSION}, model {version}"
            )

    # --- API ---

    def predict(self, img: Image) -> ProbMap:
        if self._proc.poll() is not None:
            raise self._fail("model process has exited")
        deadline = time.monotonic() + self.timeout
        self._write_all(protocol.pack_request(img.to_uint8()), deadline)
        header = self._read_exact(protocol.RESPONSE_HEADER.size, deadline, "response header")
        magic, width, height = protocol.RESPONSE_HEADER.unpack(header)
        if magic != protocol.MAGIC_RESPONSE:
            raise self._fail(f"bad response magic {magic!r}")
        if (width, height) != (img.width, img.height):
            raise self._fail(
                f"response dimensions {width}x{height} do not match request {img.width}x{img.height}"
            )
        payload = self._read_exact(width * height * 4, deadline, "response payload")
        probs = np.frombuffer(payload, dtype="<f4").reshape(height, width)
        if not np.isfinite(probs).all() or probs.min() < 0.0 or probs.max() > 1.0:
            raise self._fail("response probabilities outside [0, 1]")
        return ProbMap(probs)

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self) -> "SubprocessModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_model(descriptor: str, timeout: float = 30.0):
    """`builtin` gives the in-process reference model; anything else is run
    as a subprocess command speaking the wire protocol."""
    if descriptor == "builtin":
        return ReferenceModel()
    return SubprocessModel(descriptor, timeout=timeout)
