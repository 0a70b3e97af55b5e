"""Model-side codec for the framed falsification protocol.

Byte layout (all integers little-endian):
  handshake  `FALH` | u16 version        (client speaks first, server echoes)
  request    `FALQ` | u32 width | u32 height | u8 channels(=3) | RGB8 raster
  response   `FALR` | u32 width | u32 height | width*height float32 in [0,1]
"""
from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

MAGIC_HELLO = b"FALH"
MAGIC_REQUEST = b"FALQ"
MAGIC_RESPONSE = b"FALR"
PROTOCOL_VERSION = 1

_REQ_DIMS = struct.Struct("<IIB")


class FrameError(Exception):
    """Malformed or truncated frame on the wire."""


def read_exact(stream: BinaryIO, n: int, context: str) -> bytes:
    data = stream.read(n)
    if data is None or len(data) != n:
        raise FrameError(f"truncated {context}: expected {n} bytes, got {len(data or b'')}")
    return data


def read_handshake(stream: BinaryIO) -> int:
    raw = read_exact(stream, 6, "handshake")
    if raw[:4] != MAGIC_HELLO:
        raise FrameError(f"bad handshake magic {raw[:4]!r}")
    return struct.unpack("<H", raw[4:6])[0]


def write_handshake(stream: BinaryIO, version: int = PROTOCOL_VERSION) -> None:
    stream.write(MAGIC_HELLO + struct.pack("<H", version))
    stream.flush()


def read_request(stream: BinaryIO) -> np.ndarray | None:
    """Read one request; returns the (h, w, 3) uint8 image, or None on EOF."""
    magic = stream.read(4)
    if not magic:
        return None
    if magic != MAGIC_REQUEST:
        raise FrameError(f"bad request magic {magic!r}")
    width, height, channels = _REQ_DIMS.unpack(read_exact(stream, _REQ_DIMS.size, "request header"))
    if channels != 3:
        raise FrameError(f"unsupported channel count {channels}")
    if width < 1 or height < 1:
        raise FrameError(f"invalid request dimensions {width}x{height}")
    raster = read_exact(stream, width * height * 3, "request raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)


def write_response(stream: BinaryIO, probs: np.ndarray) -> None:
    height, width = probs.shape
    stream.write(MAGIC_RESPONSE + struct.pack("<II", width, height))
    stream.write(np.ascontiguousarray(probs, dtype="<f4").tobytes())
    stream.flush()
