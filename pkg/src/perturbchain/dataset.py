"""Dataset ingestion and generation.

Images travel as binary PPM (P6, maxval 255); masks as a run-length-encoded
text format: a `width height` header line followed by `start length` pairs of
row-major flat indices. A seeded synthetic generator produces band-tracking
scenes sized for desk-scale experiments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .imgcore import Image, Mask
from .perturb.texture import value_noise

__all__ = [
    "DecodeError",
    "DatasetItem",
    "Dataset",
    "read_ppm",
    "write_ppm",
    "encode_rle",
    "decode_rle",
    "read_mask_rle",
    "write_mask_rle",
    "load_dataset",
    "write_manifest",
    "SyntheticStyle",
    "generate_synthetic",
    "write_synthetic",
]


class DecodeError(ValueError):
    """Malformed file; the message names the file and byte offset."""

    def __init__(self, path: str | Path | None, offset: int, reason: str):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}byte {offset}: {reason}")
        self.path = path
        self.offset = offset


# --- PPM (P6) ----------------------------------------------------------------

def _next_token(buf: bytes, pos: int, path) -> tuple[bytes, int]:
    # skip whitespace and '#' comments, per the PPM header grammar
    while pos < len(buf):
        ch = buf[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= len(buf):
        raise DecodeError(path, pos, "unexpected end of header")
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def decode_ppm(buf: bytes, path=None) -> Image:
    if buf[:2] != b"P6":
        raise DecodeError(path, 0, f"not a binary PPM (expected magic P6, got {buf[:2]!r})")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(buf, pos, path)
        if not token.isdigit():
            raise DecodeError(path, pos - len(token), f"expected integer, got {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError(path, 2, f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise DecodeError(path, pos, f"unsupported maxval {maxval} (only 255)")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    raster = buf[pos : pos + expected]
    if len(raster) != expected:
        raise DecodeError(
            path, pos + len(raster), f"truncated raster: got {len(raster)} of {expected} bytes"
        )
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Image.from_uint8(arr)


def encode_ppm(img: Image) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.to_uint8().tobytes()


def read_ppm(path: str | Path) -> Image:
    return decode_ppm(Path(path).read_bytes(), path)


def write_ppm(path: str | Path, img: Image) -> None:
    Path(path).write_bytes(encode_ppm(img))


# --- RLE masks ---------------------------------------------------------------

def encode_rle(mask: Mask) -> str:
    flat = mask.data.reshape(-1).astype(np.int8)
    lines = [f"{mask.width} {mask.height}"]
    # run boundaries via the padded difference of the 0/1 sequence
    steps = np.diff(np.concatenate(([0], flat, [0])))
    starts = np.nonzero(steps == 1)[0]
    ends = np.nonzero(steps == -1)[0]
    for s, e in zip(starts, ends):
        lines.append(f"{s} {e - s}")
    return "\n".join(lines) + "\n"


def decode_rle(text: str, path=None) -> Mask:
    offset = 0
    lines = text.splitlines(keepends=True)
    if not lines:
        raise DecodeError(path, 0, "empty mask file")
    header = lines[0].split()
    if len(header) != 2:
        raise DecodeError(path, 0, f"expected 'width height' header, got {lines[0]!r}")
    try:
        width, height = int(header[0]), int(header[1])
    except ValueError:
        raise DecodeError(path, 0, f"non-integer dimensions in {lines[0]!r}") from None
    if width < 1 or height < 1:
        raise DecodeError(path, 0, f"invalid dimensions {width}x{height}")
    offset += len(lines[0])
    size = width * height
    flat = np.zeros(size, dtype=np.bool_)
    prev_end = 0
    for line in lines[1:]:
        stripped = line.strip()
        if stripped:
            parts = stripped.split()
            if len(parts) != 2:
                raise DecodeError(path, offset, f"expected 'start length' pair, got {stripped!r}")
            try:
                start, length = int(parts[0]), int(parts[1])
            except ValueError:
                raise DecodeError(path, offset, f"non-integer run in {stripped!r}") from None
            if length < 1:
                raise DecodeError(path, offset, f"run length must be positive, got {length}")
            if start < prev_end:
                raise DecodeError(
                    path, offset, f"run at {start} overlaps or precedes previous end {prev_end}"
                )
            if start + length > size:
                raise DecodeError(
                    path, offset, f"run {start}+{length} exceeds {width}x{height}={size} pixels"
                )
            flat[start : start + length] = True
            prev_end = start + length
        offset += len(line)
    return Mask(flat.reshape(height, width))


def read_mask_rle(path: str | Path) -> Mask:
    return decode_rle(Path(path).read_text(), path)


def write_mask_rle(path: str | Path, mask: Mask) -> None:
    Path(path).write_text(encode_rle(mask))


# --- manifest and dataset ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class DatasetItem:
    id: str
    image: Image
    mask: Mask


@dataclass(frozen=True, eq=False)
class Dataset:
    items: tuple[DatasetItem, ...]

    def __post_init__(self) -> None:
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in dataset")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def ids(self) -> tuple[str, ...]:
        return tuple(it.id for it in self.items)

    def get(self, image_id: str) -> DatasetItem:
        for it in self.items:
            if it.id == image_id:
                return it
        raise KeyError(f"no image {image_id!r} in dataset")


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Load a `image_id,image_path,mask_path` manifest; paths are relative to it."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    items = []
    with open(manifest_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image_id", "image_path", "mask_path"]:
            raise ValueError(
                f"{manifest_path}: expected header image_id,image_path,mask_path, got {header}"
            )
        for line in reader:
            if not line:
                continue
            if len(line) != 3:
                raise ValueError(f"{manifest_path}: malformed row {line!r}")
            image_id, image_rel, mask_rel = line
            image = read_ppm(root / image_rel)
            mask = read_mask_rle(root / mask_rel)
            if (image.height, image.width) != (mask.height, mask.width):
                raise ValueError(
                    f"{manifest_path}: {image_id}: image {image.width}x{image.height} "
                    f"does not match mask {mask.width}x{mask.height}"
                )
            items.append(DatasetItem(image_id, image, mask))
    if not items:
        raise ValueError(f"{manifest_path}: manifest lists no images")
    return Dataset(tuple(items))


def write_manifest(path: str | Path, rows: Sequence[tuple[str, str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "image_path", "mask_path"])
        writer.writerows(rows)


# --- synthetic scenes --------------------------------------------------------

@dataclass(frozen=True)
class SyntheticStyle:
    """Scene parameters for the generator; defaults are the standard test scene.

    The distractor is a second, dimmer band that is not part of the mask: it
    sits below the detection threshold on clean images but crosses it early
    and gradually under luminance-raising perturbations, giving the model a
    smooth failure onset instead of an all-or-nothing cliff.
    """

    background: float = 0.3
    band_luminance: float = 0.85
    noise_amplitude: float = 0.05
    band_width_range: tuple[int, int] = (6, 10)
    distractor_luminance: float = 0.62
    distractor_width_range: tuple[int, int] = (6, 9)


def generate_synthetic(
    n: int,
    seed: int = 0,
    width: int = 96,
    height: int = 64,
    style: SyntheticStyle = SyntheticStyle(),
    id_prefix: str = "syn",
) -> Dataset:
    """Scenes with one bright band along a random quadratic curve.

    The band is the ground-truth mask. A shared low-amplitude value-noise
    field modulates background and band so model responses vary smoothly
    across pixels and images.
    """
    if n < 1:
        raise ValueError("need at least one image")
    rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))

    def quadratic_band(width_range):
        # band center through three random waypoints, widths in pixels
        y0, y1, y2 = rng.uniform(0.25 * height, 0.75 * height, size=3)
        t = np.linspace(0.0, 1.0, width)
        center = y0 + (4 * y1 - y2 - 3 * y0) * t + (2 * y2 + 2 * y0 - 4 * y1) * t**2
        band_width = int(rng.integers(width_range[0], width_range[1] + 1))
        rows = np.arange(height, dtype=np.float64)[:, None]
        return np.abs(rows - center[None, :]) <= band_width / 2.0

    items = []
    for i in range(n):
        noise = (value_noise(rng, height, width, 4, 6) - 0.5) * (2.0 * style.noise_amplitude)
        band = quadratic_band(style.band_width_range)
        distractor = quadratic_band(style.distractor_width_range) & ~band
        lum = np.where(band, style.band_luminance, style.background)
        lum = np.where(distractor, style.distractor_luminance, lum) + noise
        img = Image(np.clip(np.repeat(lum[:, :, None], 3, axis=2), 0.0, 1.0))
        items.append(DatasetItem(f"{id_prefix}{i:04d}", img, Mask(band)))
    return Dataset(tuple(items))


def write_synthetic(
    out_dir: str | Path,
    n: int,
    seed: int = 0,
    width: int = 96,
    height: int = 64,
    style: SyntheticStyle = SyntheticStyle(),
) -> Path:
    """Generate scenes and write images/, masks/, and manifest.csv; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    dataset = generate_synthetic(n, seed=seed, width=width, height=height, style=style)
    rows = []
    for item in dataset:
        image_rel = f"images/{item.id}.ppm"
        mask_rel = f"masks/{item.id}.rle"
        write_ppm(out_dir / image_rel, item.image)
        write_mask_rle(out_dir / mask_rel, item.mask)
        rows.append((item.id, image_rel, mask_rel))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
