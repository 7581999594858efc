"""Shared fixtures: synthetic texture datasets and test images.

Four texture motifs (checkerboard, crosses, dots, diamond crosshatch) give
a 4-class dataset that a corner-histogram pipeline can separate; a block
"mondrian" image provides dense corners for rotation experiments.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_png(path: Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def _finish(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    img = img + rng.normal(0.0, 5.0, img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def _motif_checker(rng: np.random.Generator, n: int) -> np.ndarray:
    step = int(rng.integers(22, 38))
    hi, lo = int(rng.integers(185, 225)), int(rng.integers(35, 75))
    off_y, off_x = rng.integers(0, step, 2)
    yy, xx = np.mgrid[0:n, 0:n]
    tile = (((yy + off_y) // step + (xx + off_x) // step) % 2) == 0
    return _finish(np.where(tile, hi, lo).astype(np.float64), rng)


def _motif_crosses(rng: np.random.Generator, n: int) -> np.ndarray:
    img = np.full((n, n), float(rng.integers(170, 210)))
    for _ in range(int(rng.integers(30, 45))):
        cy, cx = rng.integers(14, n - 14, 2)
        arm = int(rng.integers(7, 13))
        th = int(rng.integers(2, 4))
        val = float(rng.integers(15, 70))
        img[cy - th:cy + th + 1, cx - arm:cx + arm + 1] = val
        img[cy - arm:cy + arm + 1, cx - th:cx + th + 1] = val
    return _finish(img, rng)


def _motif_dots(rng: np.random.Generator, n: int) -> np.ndarray:
    img = np.full((n, n), float(rng.integers(185, 220)))
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(int(rng.integers(50, 70))):
        cy, cx = rng.integers(10, n - 10, 2)
        r = int(rng.integers(4, 9))
        img[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = float(rng.integers(20, 70))
    return _finish(img, rng)


def _motif_diamonds(rng: np.random.Generator, n: int) -> np.ndarray:
    period = int(rng.integers(18, 28))
    hi, lo = int(rng.integers(185, 225)), int(rng.integers(35, 75))
    p1, p2 = rng.integers(0, period, 2)
    yy, xx = np.mgrid[0:n, 0:n]
    a = ((xx + yy + p1) % period) < period // 2
    b = ((xx - yy + p2) % period) < period // 2
    return _finish(np.where(a ^ b, hi, lo).astype(np.float64), rng)


MOTIFS = {
    "checker": _motif_checker,
    "crosses": _motif_crosses,
    "diamonds": _motif_diamonds,
    "dots": _motif_dots,
}


def make_texture_dataset(root: Path, per_class: int, size: int,
                         class_names=None, seed_base: int = 17) -> Path:
    names = sorted(class_names if class_names is not None else MOTIFS)
    for ci, name in enumerate(names):
        motif = MOTIFS[name]
        for i in range(per_class):
            rng = np.random.default_rng(seed_base + 1000 * ci + i)
            write_png(root / name / f"img_{i:03d}.png", motif(rng, size))
    return root


def make_mondrian(seed: int = 5, n: int = 512) -> np.ndarray:
    """Block collage with corners everywhere; good rotation-test fodder."""
    rng = np.random.default_rng(seed)
    img = np.full((n, n), 128.0)
    for _ in range(250):
        y, x = rng.integers(0, n - 40, 2)
        h, w = rng.integers(10, 40, 2)
        img[y:y + h, x:x + w] = float(rng.integers(10, 246))
    img += rng.normal(0.0, 3.0, (n, n))
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def rotate_bilinear(img: np.ndarray, theta: float, fill: float = 128.0) -> np.ndarray:
    """Rotate about the image center, bilinear resampling, constant fill.

    Defined so that input pixel p lands at map_points(p, theta) in the
    output. Independent of the library's interpolation code.
    """
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    c, s = np.cos(theta), np.sin(theta)
    # inverse map: rotate output coordinates by -theta
    sx = cx + (xx - cx) * c + (yy - cy) * s
    sy = cy - (xx - cx) * s + (yy - cy) * c
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx, fy = sx - x0, sy - y0
    src = img.astype(np.float64)
    out = (src[y0, x0] * (1 - fx) * (1 - fy) + src[y0, x1] * fx * (1 - fy)
           + src[y1, x0] * (1 - fx) * fy + src[y1, x1] * fx * fy)
    out = np.where(valid, out, fill)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def map_points(xs, ys, theta: float, shape) -> tuple[np.ndarray, np.ndarray]:
    """Forward map matching rotate_bilinear's geometry."""
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    c, s = np.cos(theta), np.sin(theta)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    return (cx + (xs - cx) * c - (ys - cy) * s,
            cy + (xs - cx) * s + (ys - cy) * c)


def write_config(path: Path, **overrides) -> Path:
    """A small, fast pipeline config; overrides are applied on top."""
    doc = {
        "resize": [96, 96],
        "orb": {"n_features": 80, "n_levels": 2, "fast_threshold": 20},
        "k": 4,
        "kmeans": {"seed": 0, "max_iter": 50, "tol": 0.0},
        "tree": {"depth_min": 1, "depth_max": 4, "split_seed": 0},
        "workers": 1,
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc, indent=2))
    return path


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Path:
    """2 classes x 6 images, 96x96; fast enough for per-command CLI tests."""
    root = tmp_path_factory.mktemp("tiny_dataset")
    return make_texture_dataset(root, per_class=6, size=96,
                                class_names=["checker", "dots"])


@pytest.fixture(scope="session")
def texture_dataset(tmp_path_factory) -> Path:
    """4 classes x 50 images, 320x320; the separability fixture."""
    root = tmp_path_factory.mktemp("texture_dataset")
    return make_texture_dataset(root, per_class=50, size=320)


@pytest.fixture(scope="session")
def mondrian() -> np.ndarray:
    return make_mondrian()


@pytest.fixture(scope="session")
def brief_patches() -> list[np.ndarray]:
    """1200 textured 35x35 patches for pattern learning."""
    patches = []
    rng = np.random.default_rng(99)
    sources = [make_mondrian(seed=s, n=256) for s in (11, 12, 13)]
    for i in range(1200):
        src = sources[i % len(sources)]
        y, x = rng.integers(0, 256 - 35, 2)
        patches.append(src[y:y + 35, x:x + 35].copy())
    return patches
