"""The synchronous request/response loop on stdin/stdout."""
from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import BinaryIO, Callable

import numpy as np

from . import frames
from .models import ModelFn, resolve_model


@dataclass(frozen=True)
class AdapterConfig:
    """Exactly one model source: a built-in name or a loader callback."""

    model: str | None = None
    loader: Callable[[], ModelFn] | None = None
    device: str = "cpu"
    timeout: float = 30.0  # advisory; the harness side enforces deadlines

    def __post_init__(self) -> None:
        if (self.model is None) == (self.loader is None):
            raise ValueError("configure exactly one of model name or loader callback")

    def resolve(self) -> ModelFn:
        if self.loader is not None:
            return self.loader()
        return resolve_model(self.model)


def serve(
    config: AdapterConfig,
    stdin: BinaryIO | None = None,
    stdout: BinaryIO | None = None,
    stderr=None,
) -> int:
    """Handshake, then answer framed requests until stdin closes.

    Returns the process exit code: 0 on clean EOF, 2 on protocol violations
    (nothing further is written once a frame is malformed).
    """
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    stderr = stderr if stderr is not None else sys.stderr
    model = config.resolve()
    try:
        version = frames.read_handshake(stdin)
    except frames.FrameError as exc:
        print(f"adapter: {exc}", file=stderr)
        return 2
    if version != frames.PROTOCOL_VERSION:
        print(
            f"adapter: protocol version mismatch: peer {version}, "
            f"supported {frames.PROTOCOL_VERSION}",
            file=stderr,
        )
        return 2
    frames.write_handshake(stdout)
    while True:
        try:
            request = frames.read_request(stdin)
        except frames.FrameError as exc:
            print(f"adapter: {exc}", file=stderr)
            return 2
        if request is None:
            return 0
        img = request.astype(np.float32) / np.float32(255.0)
        probs = np.asarray(model(img), dtype=np.float32)
        if probs.shape != request.shape[:2]:
            print(
                f"adapter: model returned shape {probs.shape}, expected {request.shape[:2]}",
                file=stderr,
            )
            return 3
        frames.write_response(stdout, np.clip(probs, 0.0, 1.0))
