"""Minimal dataset reading for feature export: manifest CSV and binary PPM.

The adapter deliberately reimplements these readers so it depends on the
published file formats only, not on the harness package.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def read_ppm(path: str | Path) -> np.ndarray:
    """Binary PPM (P6, maxval 255) as an (h, w, 3) float32 array in [0, 1]."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(buf[start:pos]))
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1
    raster = buf[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise ValueError(f"{path}: truncated raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return arr.astype(np.float32) / np.float32(255.0)


def read_manifest(path: str | Path) -> list[tuple[str, Path]]:
    """(image_id, absolute image path) rows, in manifest order."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image_id", "image_path", "mask_path"]:
            raise ValueError(f"{path}: expected header image_id,image_path,mask_path")
        for line in reader:
            if line:
                rows.append((line[0], path.parent / line[1]))
    if not rows:
        raise ValueError(f"{path}: manifest lists no images")
    return rows
