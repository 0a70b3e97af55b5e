"""Grouping similar images: grid features, cosine PCA, seeded k-means.

The estimators follow the scikit-learn fit/transform/predict conventions so
the pipeline composes with the wider ecosystem, but the linear algebra is
implemented here: the falsification workflow needs bitwise-reproducible
cluster assignments under a fixed seed and per-iteration introspection,
which library implementations do not guarantee.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array

from .imgcore import Image, luminance

__all__ = [
    "FeatureMatrix",
    "ClusterModel",
    "GridFeatureExtractor",
    "CosinePCA",
    "SeededKMeans",
    "extract_features",
    "reduce_features",
    "kmeans",
    "build_cluster_model",
    "write_features_csv",
    "read_features_csv",
    "write_assignments_csv",
    "read_assignments_csv",
]

GRID_CELLS = 8
EDGE_THRESHOLD = 0.1
FEATURES_PER_CELL = 5


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Per-image feature vectors with their image ids, row-aligned."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {v.shape}")
        if len(self.ids) != v.shape[0]:
            raise ValueError(f"{len(self.ids)} ids but {v.shape[0]} feature rows")
        if not np.isfinite(v).all():
            raise ValueError("feature matrix contains non-finite values")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", v)


def extract_features(img: Image) -> np.ndarray:
    """Handcrafted 320-dim descriptor on an 8x8 cell grid.

    Per cell: mean R, mean G, mean B, luminance standard deviation, and edge
    density (fraction of pixels with gradient magnitude above 0.1).
    """
    if img.height < 1 or img.width < 1:
        raise ValueError("degenerate image")
    data = img.data.astype(np.float64)
    lum = luminance(img.data).astype(np.float64)
    gy, gx = np.gradient(lum)
    edges = np.hypot(gx, gy) > EDGE_THRESHOLD

    row_edges = np.array_split(np.arange(img.height), GRID_CELLS)
    col_edges = np.array_split(np.arange(img.width), GRID_CELLS)
    feats = np.empty(GRID_CELLS * GRID_CELLS * FEATURES_PER_CELL)
    k = 0
    for rows in row_edges:
        for cols in col_edges:
            cell = data[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
            cell_lum = lum[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
            cell_edge = edges[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
            feats[k : k + 3] = cell.reshape(-1, 3).mean(axis=0)
            feats[k + 3] = cell_lum.std()
            feats[k + 4] = cell_edge.mean()
            k += FEATURES_PER_CELL
    return feats


class GridFeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer from images to the handcrafted grid features."""

    def fit(self, X: Sequence[Image], y=None) -> "GridFeatureExtractor":
        return self

    def transform(self, X: Sequence[Image]) -> np.ndarray:
        return np.vstack([extract_features(img) for img in X])


class CosinePCA(BaseEstimator, TransformerMixin):
    """Mean-centered PCA whose projections are rescaled to unit norm.

    The unit rescaling emulates a cosine metric for the downstream k-means;
    `project`/`inverse_transform` expose the raw (unnormalized) scores so the
    linear part stays invertible.
    """

    def __init__(self, out_dim: int = 10):
        self.out_dim = out_dim

    def fit(self, X, y=None) -> "CosinePCA":
        X = check_array(X, dtype=np.float64)
        n, d = X.shape
        if n <= self.out_dim:
            raise ValueError(f"need more than out_dim={self.out_dim} samples, got {n}")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        # deterministic sign: make each component's largest coordinate positive
        flip = np.sign(vt[np.arange(vt.shape[0]), np.abs(vt).argmax(axis=1)])
        flip[flip == 0] = 1.0
        vt = vt * flip[:, None]
        rank = int(np.sum(s > s[0] * max(n, d) * np.finfo(np.float64).eps)) if s.size else 0
        components = np.zeros((self.out_dim, d))
        keep = min(self.out_dim, rank)
        components[:keep] = vt[:keep]
        if keep < self.out_dim:
            warnings.warn(
                f"data rank {rank} below out_dim {self.out_dim}; padding with zero directions",
                stacklevel=2,
            )
        self.components_ = components
        self.explained_variance_ = (s[: self.out_dim] ** 2) / max(n - 1, 1)
        return self

    def project(self, X) -> np.ndarray:
        """Unnormalized PCA scores (ordered by decreasing explained variance)."""
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def transform(self, X) -> np.ndarray:
        scores = self.project(X)
        norms = np.linalg.norm(scores, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0  # zero rows stay zero
        return scores / norms

    def inverse_transform(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components_ + self.mean_


class SeededKMeans(BaseEstimator, ClusterMixin):
    """Lloyd's k-means with k-means++ seeding, deterministic under `seed`.

    Empty clusters are repaired by re-seeding the centroid at the point
    farthest from its current centroid. With `normalize=True` the centroids
    are rescaled to unit norm after every update (spherical k-means), which
    matches the cosine-normalized rows produced by CosinePCA.
    """

    def __init__(self, n_clusters: int = 30, seed: int = 0, max_iter: int = 300, normalize: bool = False):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.normalize = normalize

    def _distances(self, X: np.ndarray, centers: np.ndarray) -> np.ndarray:
        return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)

    def _init_centers(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = X.shape[0]
        centers = np.empty((self.n_clusters, X.shape[1]))
        centers[0] = X[int(rng.integers(n))]
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for j in range(1, self.n_clusters):
            total = d2.sum()
            if total <= 0.0:
                idx = int(rng.integers(n))
            else:
                idx = int(rng.choice(n, p=d2 / total))
            centers[j] = X[idx]
            d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
        return centers

    def fit(self, X, y=None) -> "SeededKMeans":
        X = check_array(X, dtype=np.float64)
        n = X.shape[0]
        if n < self.n_clusters:
            raise ValueError(f"{n} samples is fewer than n_clusters={self.n_clusters}")
        rng = np.random.Generator(np.random.PCG64(self.seed & ((1 << 64) - 1)))
        centers = self._init_centers(X, rng)
        if self.normalize:
            centers = self._unit(centers)
        labels = np.full(n, -1)
        history: list[float] = []
        for _ in range(self.max_iter):
            d2 = self._distances(X, centers)
            new_labels = d2.argmin(axis=1)
            history.append(float(d2[np.arange(n), new_labels].sum()))
            if np.array_equal(new_labels, labels):
                labels = new_labels
                break
            labels = new_labels
            d_own = d2[np.arange(n), labels]
            for j in range(self.n_clusters):
                members = X[labels == j]
                if len(members) == 0:
                    # farthest point from its own centroid becomes the new seed
                    worst = int(d_own.argmax())
                    centers[j] = X[worst]
                    labels[worst] = j
                    d_own[worst] = 0.0
                else:
                    centers[j] = members.mean(axis=0)
            if self.normalize:
                centers = self._unit(centers)
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_history_ = history
        self.inertia_ = history[-1]
        return self

    @staticmethod
    def _unit(centers: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(centers, axis=1, keepdims=True)
        safe = norms.copy()
        safe[safe < 1e-12] = 1.0
        return centers / safe

    def predict(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        return self._distances(X, self.cluster_centers_).argmin(axis=1)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Fitted feature pipeline: reduction basis, centroids, and assignments."""

    reducer: CosinePCA
    clusterer: SeededKMeans
    assignment: dict[str, int]

    def members(self, cluster_id: int) -> tuple[str, ...]:
        return tuple(i for i, c in self.assignment.items() if c == cluster_id)

    def cluster_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.assignment.values())))


def reduce_features(features: FeatureMatrix, out_dim: int = 10) -> tuple[CosinePCA, np.ndarray]:
    """Fit the PCA reduction and return it with the reduced (unit-norm) rows."""
    pca = CosinePCA(out_dim=out_dim).fit(features.values)
    return pca, pca.transform(features.values)


def kmeans(reduced: np.ndarray, k: int = 30, seed: int = 0, max_iter: int = 300) -> SeededKMeans:
    return SeededKMeans(n_clusters=k, seed=seed, max_iter=max_iter, normalize=True).fit(reduced)


def build_cluster_model(
    features: FeatureMatrix, k: int = 30, seed: int = 0, out_dim: int = 10
) -> ClusterModel:
    pca, reduced = reduce_features(features, out_dim=out_dim)
    km = kmeans(reduced, k=k, seed=seed)
    assignment = {img_id: int(c) for img_id, c in zip(features.ids, km.labels_)}
    return ClusterModel(pca, km, assignment)


# --- CSV interfaces ----------------------------------------------------------

def write_features_csv(features: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id"] + [f"f{i}" for i in range(features.values.shape[1])])
        for img_id, row in zip(features.ids, features.values):
            writer.writerow([img_id] + [repr(float(v)) for v in row])


def read_features_csv(path: str | Path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "image_id":
            raise ValueError(f"{path}: expected header starting with image_id")
        ids = []
        rows = []
        for line in reader:
            if not line:
                continue
            ids.append(line[0])
            rows.append([float(v) for v in line[1:]])
    if not rows:
        raise ValueError(f"{path}: no feature rows")
    return FeatureMatrix(tuple(ids), np.array(rows))


def write_assignments_csv(assignment: dict[str, int], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "cluster_id"])
        for img_id, cluster_id in assignment.items():
            writer.writerow([img_id, cluster_id])


def read_assignments_csv(path: str | Path) -> dict[str, int]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image_id", "cluster_id"]:
            raise ValueError(f"{path}: expected header image_id,cluster_id")
        return {line[0]: int(line[1]) for line in reader if line}
