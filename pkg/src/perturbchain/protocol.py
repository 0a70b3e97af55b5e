"""Framed binary wire format for querying segmentation models over pipes.

All integers are little-endian. The harness initiates a handshake
(`FALH` + u16 version); the model replies in kind. Each prediction request is
`FALQ` | u32 width | u32 height | u8 channels(=3) | RGB8 raster; the response
is `FALR` | u32 width | u32 height | width*height float32 probabilities.
"""
from __future__ import annotations

import struct

import numpy as np

__all__ = [
    "MAGIC_HELLO",
    "MAGIC_REQUEST",
    "MAGIC_RESPONSE",
    "PROTOCOL_VERSION",
    "pack_handshake",
    "pack_request",
    "pack_response",
    "HANDSHAKE_SIZE",
    "REQUEST_HEADER",
    "RESPONSE_HEADER",
]

MAGIC_HELLO = b"FALH"
MAGIC_REQUEST = b"FALQ"
MAGIC_RESPONSE = b"FALR"
PROTOCOL_VERSION = 1

HANDSHAKE_SIZE = 6  # magic + u16 version
REQUEST_HEADER = struct.Struct("<4sIIB")
RESPONSE_HEADER = struct.Struct("<4sII")


def pack_handshake(version: int = PROTOCOL_VERSION) -> bytes:
    return MAGIC_HELLO + struct.pack("<H", version)


def pack_request(rgb8: np.ndarray) -> bytes:
    """Frame an (h, w, 3) uint8 raster as a prediction request."""
    h, w = rgb8.shape[:2]
    return REQUEST_HEADER.pack(MAGIC_REQUEST, w, h, 3) + rgb8.tobytes()


def pack_response(probs: np.ndarray) -> bytes:
    """Frame an (h, w) float32 probability map as a response."""
    h, w = probs.shape
    return RESPONSE_HEADER.pack(MAGIC_RESPONSE, w, h) + probs.astype("<f4").tobytes()
