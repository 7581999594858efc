"""Image decoding, grayscale conversion, bilinear resize, dataset listing.

Images are plain numpy arrays: grayscale is an (h, w) uint8 array, RGB is
an (h, w, 3) uint8 array. All operations here are pure and deterministic,
so outputs are reproducible across machines and thread counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImageError,
    EmptyClassError,
    EmptyDatasetError,
    UnsupportedFormatError,
    ZeroDimensionError,
)

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}

# ITU-R BT.601 luma weights.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


@dataclass(frozen=True)
class DatasetClass:
    """One class directory: dense label id, directory name, sorted image paths."""

    label: int
    name: str
    paths: tuple[Path, ...]


@dataclass(frozen=True)
class DatasetManifest:
    """Labelled enumeration of a class-per-directory dataset."""

    classes: tuple[DatasetClass, ...] = field(default_factory=tuple)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_images(self) -> int:
        return sum(len(c.paths) for c in self.classes)

    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG or JPEG file into an (h, w, 3) uint8 RGB array.

    Raises FileNotFoundError, UnsupportedFormatError, or CorruptImageError,
    each naming the offending path.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise UnsupportedFormatError(
                    f"{path}: format {im.format!r} is not PNG or JPEG"
                )
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: not a recognizable image") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise CorruptImageError(f"{path}: decoded to unexpected shape {arr.shape}")
    return arr


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma with round-half-up: round(0.299 R + 0.587 G + 0.114 B)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB array, got shape {img.shape}")
    rgb = img.astype(np.float64)
    luma = _LUMA_R * rgb[..., 0] + _LUMA_G * rgb[..., 1] + _LUMA_B * rgb[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment (grayscale or RGB).

    Source coordinate of output pixel j is (j + 0.5) * in/out - 0.5, clamped
    to the valid range, so constant images stay constant and same-size
    resizes are identity.
    """
    if out_w < 1 or out_h < 1:
        raise ZeroDimensionError(f"resize target {out_w}x{out_h} has a zero dimension")
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected (h, w) or (h, w, 3) array, got shape {img.shape}")
    in_h, in_w = img.shape[:2]
    if (in_w, in_h) == (out_w, out_h):
        return img.copy()

    src = img.astype(np.float64)
    tmp = _lerp_axis(src, out_w, axis=1)
    out = _lerp_axis(tmp, out_h, axis=0)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _lerp_axis(arr: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Linear interpolation along one axis with pixel-center alignment."""
    in_n = arr.shape[axis]
    pos = (np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5
    pos = np.clip(pos, 0.0, in_n - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, in_n - 1)
    w_hi = pos - lo
    w_lo = 1.0 - w_hi
    lo_vals = np.take(arr, lo, axis=axis)
    hi_vals = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = out_n
    return lo_vals * w_lo.reshape(shape) + hi_vals * w_hi.reshape(shape)


def load_dataset(root: str | Path) -> DatasetManifest:
    """Enumerate a <root>/<class>/<image> layout into a manifest.

    Classes get dense label ids 0..C-1 in sorted directory-name order;
    images are listed in sorted filename order. Files whose extension is
    not .png/.jpg/.jpeg are skipped with a log line.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root is not a directory: {root}")
    class_dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
    if not class_dirs:
        raise EmptyDatasetError(f"no class subdirectories under {root}")

    classes = []
    for label, class_dir in enumerate(class_dirs):
        paths = []
        for p in sorted(class_dir.iterdir(), key=lambda p: p.name):
            if not p.is_file():
                continue
            if p.suffix.lower() in IMAGE_EXTENSIONS:
                paths.append(p)
            else:
                logger.info("skipping non-image file %s", p)
        if not paths:
            raise EmptyClassError(f"class directory {class_dir} holds no images")
        classes.append(DatasetClass(label=label, name=class_dir.name, paths=tuple(paths)))
    return DatasetManifest(classes=tuple(classes))
