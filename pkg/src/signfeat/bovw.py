"""Bag-of-visual-words quantization over binary descriptor bytes.

Descriptors from the whole dataset are pooled and clustered with Lloyd's
algorithm (k-means++ start, seeded); each image is then summarized as the
histogram of its descriptors' nearest centroids. Feature tables travel as
plain integer CSV, codebooks as JSON.

Determinism contract: one RNG seeded once, fixed iteration orders, ties to
the lowest cluster index, empty clusters reseeded ascending. Same seed and
data give a bit-identical codebook on any machine or thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidKError,
    RaggedRowsError,
    TooFewDistinctPointsError,
)

_ASSIGN_CHUNK = 16384


@dataclass(frozen=True)
class Codebook:
    """Fitted k-means centroids plus the fit's provenance."""

    centroids: np.ndarray  # (k, d) float64
    seed: int
    iterations_run: int
    inertia: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError(f"centroids must be (k, d) with k >= 1, got {c.shape}")
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point (ties to the lowest index) and squared distance."""
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for start in range(0, n, _ASSIGN_CHUNK):
        chunk = points[start:start + _ASSIGN_CHUNK]
        stop = start + chunk.shape[0]
        diff = chunk[:, None, :] - centroids[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels[start:stop] = d2.argmin(axis=1)
        dist2[start:stop] = d2[np.arange(chunk.shape[0]), labels[start:stop]]
    return labels, dist2


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: centers drawn with probability proportional to D^2."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise TooFewDistinctPointsError(
                f"cannot seed {k} centers: all remaining points coincide"
            )
        cum = np.cumsum(d2)
        pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
        pick = min(pick, n - 1)
        centroids[j] = points[pick]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 100,
               tol: float = 0.0) -> Codebook:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops at max_iter, when the assignment reaches a fixed point, or when
    the inertia improvement drops below tol. Empty clusters are reseeded
    (ascending) with the point currently farthest from its own centroid.
    The recorded inertia is exact for the returned centroids. Inertia is
    checked to be non-increasing (1e-9 relative) on every iteration.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError(f"points must be a non-empty (n, d) array, got {points.shape}")
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    n_distinct = np.unique(points, axis=0).shape[0]
    if n_distinct < k:
        raise TooFewDistinctPointsError(
            f"k = {k} exceeds the {n_distinct} distinct points available"
        )
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(points, k, rng)
    prev_labels = None
    prev_inertia = None
    iterations = 0
    for _ in range(max_iter):
        labels, dist2 = _assign(points, centroids)
        inertia = float(dist2.sum())
        iterations += 1
        if prev_inertia is not None:
            if inertia > prev_inertia * (1.0 + 1e-9) + 1e-12:
                raise AssertionError(
                    f"Lloyd inertia increased: {prev_inertia!r} -> {inertia!r}"
                )
            if prev_inertia - inertia < tol or np.array_equal(labels, prev_labels):
                break
        if iterations == max_iter:
            break
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] == 0:
                far = int(np.argmax(dist2))
                centroids[j] = points[far]
                labels[far] = j
                dist2[far] = 0.0
            else:
                centroids[j] = members.mean(axis=0)
        prev_labels = labels.copy()
        prev_inertia = inertia

    return Codebook(centroids=centroids.copy(), seed=seed,
                    iterations_run=iterations, inertia=inertia)


def kmeans_predict(cb: Codebook, v) -> int:
    """Index of the nearest centroid by squared distance, ties to lowest."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (cb.dim,):
        raise DimensionMismatchError(
            f"vector shape {v.shape} does not match codebook dimension {cb.dim}"
        )
    d2 = ((cb.centroids - v[None, :]) ** 2).sum(axis=1)
    return int(d2.argmin())


def encode_image(cb: Codebook, descriptors) -> np.ndarray:
    """Histogram of nearest-centroid assignments; raw counts, not normalized.

    Zero descriptors give the all-zero histogram. counts.sum() always
    equals the number of input descriptors.
    """
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.size == 0:
        return np.zeros(cb.k, dtype=np.int64)
    if descriptors.ndim != 2 or descriptors.shape[1] != cb.dim:
        raise DimensionMismatchError(
            f"descriptors shape {descriptors.shape} does not match "
            f"codebook dimension {cb.dim}"
        )
    labels, _ = _assign(descriptors, cb.centroids)
    return np.bincount(labels, minlength=cb.k).astype(np.int64)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_codebook(cb: Codebook, path: str | Path) -> None:
    doc = {
        "k": cb.k,
        "dim": cb.dim,
        "seed": cb.seed,
        "iterations_run": cb.iterations_run,
        "inertia": cb.inertia,
        "centroids": [[float(v) for v in row] for row in cb.centroids],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="ascii")


def load_codebook(path: str | Path) -> Codebook:
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    centroids = np.asarray(doc["centroids"], dtype=np.float64)
    if centroids.shape != (doc["k"], doc["dim"]):
        raise ValueError(
            f"{path}: centroid array {centroids.shape} disagrees with "
            f"header k={doc['k']} dim={doc['dim']}"
        )
    return Codebook(centroids=centroids, seed=int(doc["seed"]),
                    iterations_run=int(doc["iterations_run"]),
                    inertia=float(doc["inertia"]))


def write_feature_csv(rows, path: str | Path, n_cols: int | None = None) -> None:
    """Integer table as CSV: header of column indices, LF endings, no quoting."""
    rows = [np.asarray(r) for r in rows]
    if rows:
        width = rows[0].shape[0] if rows[0].ndim == 1 else -1
        for i, r in enumerate(rows):
            if r.ndim != 1 or r.shape[0] != width:
                raise ValueError(f"row {i} has width {r.shape}, expected {width}")
        if n_cols is not None and n_cols != width:
            raise ValueError(f"rows have width {width} but n_cols = {n_cols}")
    else:
        if n_cols is None:
            raise ValueError("writing an empty table requires n_cols")
        width = n_cols
    lines = [",".join(str(i) for i in range(width))]
    lines.extend(",".join(str(int(v)) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_feature_csv(path: str | Path) -> np.ndarray:
    """Inverse of write_feature_csv; returns an (n, width) int64 array."""
    path = Path(path)
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file, expected a header row")
    width = len(lines[0].split(","))
    rows = np.empty((len(lines) - 1, width), dtype=np.int64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != width:
            raise RaggedRowsError(
                f"{path}: line {i} has {len(parts)} columns, expected {width}"
            )
        try:
            rows[i - 2] = [int(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"{path}: line {i}: {exc}") from None
    return rows
