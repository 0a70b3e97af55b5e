"""Feature export: run an embedding model over a manifest, write the CSV the
harness's clustering stage consumes.

The default extractor is a pretrained torchvision EfficientNet-B4 (pooled
features); it is imported lazily so the core adapter stays dependency-light.
Any `module:path` callable mapping an (h, w, 3) float32 image to a 1-D
feature vector works as a drop-in extractor.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable

import numpy as np

from .dataio import read_manifest, read_ppm
from .models import load_callable

ExtractorFn = Callable[[np.ndarray], np.ndarray]


def efficientnet_extractor(device: str = "cpu") -> ExtractorFn:
    try:
        import torch
        from torchvision.models import EfficientNet_B4_Weights, efficientnet_b4
    except ImportError as exc:
        raise ImportError(
            "the default feature extractor needs torch and torchvision; "
            "install them with: pip install 'seg-model-adapter[neural]'"
        ) from exc

    weights = EfficientNet_B4_Weights.DEFAULT
    net = efficientnet_b4(weights=weights).to(device).eval()
    preprocess = weights.transforms()

    def extract(img: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            tensor = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))
            batch = preprocess(tensor.unsqueeze(0)).to(device)
            feats = net.avgpool(net.features(batch)).flatten(1)
        return feats.squeeze(0).cpu().numpy().astype(np.float64)

    return extract


def resolve_extractor(name: str, device: str = "cpu") -> ExtractorFn:
    """`efficientnet_b4` or a `module:path` callable."""
    if name == "efficientnet_b4":
        return efficientnet_extractor(device)
    return load_callable(name)


def export_features(manifest_path: str | Path, out_path: str | Path, extractor: ExtractorFn) -> int:
    """Write one feature row per manifest image, ids in manifest order."""
    rows = read_manifest(manifest_path)
    vectors = []
    for image_id, image_path in rows:
        vec = np.asarray(extractor(read_ppm(image_path)), dtype=np.float64).reshape(-1)
        vectors.append((image_id, vec))
    dim = len(vectors[0][1])
    if any(len(v) != dim for _, v in vectors):
        raise ValueError("extractor returned inconsistent feature lengths")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id"] + [f"f{i}" for i in range(dim)])
        for image_id, vec in vectors:
            writer.writerow([image_id] + [repr(float(v)) for v in vec])
    return len(vectors)
