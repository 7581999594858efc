"""Oriented FAST corners with rotation-steered binary descriptors.

The detector runs a 9-of-16 segment test on a Bresenham circle of radius
3, suppresses non-maxima on the arc-margin score, ranks survivors by the
Harris measure, orients each keypoint by its intensity centroid, and
compares 5x5 box-smoothed point pairs to build a packed binary descriptor.
Test-point patterns can be learned offline by a greedy mean/correlation
search or drawn from a seeded Gaussian.

Everything is deterministic: fixed tie rules, fixed rounding
(half-away-from-zero), fixed orders of accumulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ImageTooSmallError,
    InsufficientPatchesError,
    OutOfBoundsError,
    PoolExhaustedError,
)
from .imageio import resize

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy).
CIRCLE16 = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
ARC_LENGTH = 9          # contiguous circle pixels required by the segment test
STEER_BINS = 30         # orientation quantization: 2*pi/30 = 12 degrees
BOX_HALF = 2            # 5x5 box smoothing before binary tests
HARRIS_KAPPA = 0.04
HARRIS_HALF = 3         # 7x7 structure-tensor window
DEFAULT_PATTERN_SEED = 7

_STEER_STEP = 2.0 * math.pi / STEER_BINS


@dataclass(frozen=True)
class OrbParams:
    """Detector and descriptor knobs.

    moment_radius is always (patch_size - 1) // 2 so the orientation disc
    and the test-point range describe the same patch.
    """

    n_features: int = 500
    fast_threshold: int = 20
    n_levels: int = 8
    scale_factor: float = 1.2
    patch_size: int = 31
    n_tests: int = 256

    def __post_init__(self):
        if self.n_features < 1 or self.n_levels < 1 or self.n_tests < 1:
            raise ValueError("n_features, n_levels and n_tests must be >= 1")
        if self.fast_threshold < 1:
            raise ValueError("fast_threshold must be >= 1")
        if self.patch_size % 2 == 0 or self.patch_size < 7:
            raise ValueError("patch_size must be odd and >= 7")
        if self.n_tests % 8 != 0:
            raise ValueError("n_tests must be a multiple of 8")
        if not self.scale_factor > 1.0:
            raise ValueError("scale_factor must be > 1")

    @property
    def moment_radius(self) -> int:
        return (self.patch_size - 1) // 2

    @property
    def edge_margin(self) -> int:
        # test points reach moment_radius, box smoothing adds BOX_HALF
        return self.moment_radius + BOX_HALF


@dataclass(frozen=True)
class Keypoint:
    """Corner in level-0 pixel units with Harris response and orientation."""

    x: float
    y: float
    octave: int
    response: float
    theta: float


@dataclass(frozen=True)
class BriefPattern:
    """n binary tests; tests[i] = (x1, y1, x2, y2), coordinates in [-r, r]."""

    tests: np.ndarray
    radius: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        tests = np.asarray(self.tests, dtype=np.int64)
        if tests.ndim != 2 or tests.shape[1] != 4:
            raise ValueError(f"tests must be (n, 4), got {tests.shape}")
        if np.abs(tests).max(initial=0) > self.radius:
            raise ValueError("test coordinates exceed the patch radius")
        object.__setattr__(self, "tests", tests)

    @property
    def n_tests(self) -> int:
        return self.tests.shape[0]


@dataclass(frozen=True)
class SteerLut:
    """Precomputed rotated copies of a pattern, one per 12-degree bin."""

    bins: np.ndarray  # (STEER_BINS, n, 4) int64
    radius: int

    @property
    def n_tests(self) -> int:
        return self.bins.shape[1]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected (h, w) grayscale array, got shape {img.shape}")
    return img


_disc_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _disc_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    """All integer (u, v) with u^2 + v^2 <= r^2, row-major order."""
    if r not in _disc_cache:
        vs, us = np.mgrid[-r:r + 1, -r:r + 1]
        keep = (us * us + vs * vs) <= r * r
        _disc_cache[r] = (us[keep].astype(np.int64), vs[keep].astype(np.int64))
    return _disc_cache[r]


def integral_image(img: np.ndarray) -> np.ndarray:
    """Zero-padded summed-area table; S[y, x] = sum of img[:y, :x]."""
    img = _as_gray(img)
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(img, axis=0, dtype=np.int64), axis=1, out=s[1:, 1:])
    return s


def _box_sums(integral: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """5x5 box sums centered at (xs, ys); callers guarantee the margin."""
    a, b = BOX_HALF, BOX_HALF + 1
    return (integral[ys + b, xs + b] - integral[ys - a, xs + b]
            - integral[ys + b, xs - a] + integral[ys - a, xs - a])


# ---------------------------------------------------------------------------
# pyramid
# ---------------------------------------------------------------------------

def build_pyramid(img: np.ndarray, params: OrbParams) -> list[np.ndarray]:
    """Level 0 is the input; level i is floor(w / f^i) x floor(h / f^i).

    Levels that would fall below patch_size in either dimension are not
    produced; if even level 0 is too small the image is rejected.
    """
    img = _as_gray(img)
    h, w = img.shape
    levels: list[np.ndarray] = []
    for i in range(params.n_levels):
        s = params.scale_factor ** i
        lw, lh = int(w / s), int(h / s)
        if lw < params.patch_size or lh < params.patch_size:
            break
        levels.append(img if i == 0 else resize(img, lw, lh))
    if not levels:
        raise ImageTooSmallError(
            f"image {w}x{h} is smaller than patch_size {params.patch_size}"
        )
    return levels


# ---------------------------------------------------------------------------
# FAST segment test
# ---------------------------------------------------------------------------

def fast_corner_scores(img: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Segment test at every interior pixel, before suppression.

    A pixel passes when some contiguous arc of ARC_LENGTH circle pixels is
    uniformly brighter than center + t or darker than center - t (strict).
    Returns (corner mask, score map); the score is the maximum over
    qualifying arcs of the arc's minimum absolute intensity difference.
    """
    img = _as_gray(img)
    h, w = img.shape
    if h < 7 or w < 7:
        raise ImageTooSmallError(f"image {w}x{h} cannot fit the radius-3 circle")

    signed = img.astype(np.int16)
    center = signed[3:h - 3, 3:w - 3]
    diffs = np.empty((16, h - 6, w - 6), dtype=np.int16)
    for i, (dx, dy) in enumerate(CIRCLE16):
        diffs[i] = signed[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] - center

    bright = diffs > t
    dark = diffs < -t
    # circular windows via a wrapped extension
    diffs_ext = np.concatenate([diffs, diffs[:ARC_LENGTH - 1]], axis=0)
    bright_ext = np.concatenate([bright, bright[:ARC_LENGTH - 1]], axis=0)
    dark_ext = np.concatenate([dark, dark[:ARC_LENGTH - 1]], axis=0)

    corner = np.zeros(center.shape, dtype=bool)
    score = np.zeros(center.shape, dtype=np.int32)
    for s in range(16):
        window = diffs_ext[s:s + ARC_LENGTH]
        ok_b = bright_ext[s:s + ARC_LENGTH].all(axis=0)
        if ok_b.any():
            arc_min = window.min(axis=0).astype(np.int32)
            np.maximum(score, np.where(ok_b, arc_min, 0), out=score)
            corner |= ok_b
        ok_d = dark_ext[s:s + ARC_LENGTH].all(axis=0)
        if ok_d.any():
            arc_min = (-window.max(axis=0)).astype(np.int32)
            np.maximum(score, np.where(ok_d, arc_min, 0), out=score)
            corner |= ok_d

    mask = np.zeros((h, w), dtype=bool)
    smap = np.zeros((h, w), dtype=np.int32)
    mask[3:h - 3, 3:w - 3] = corner
    smap[3:h - 3, 3:w - 3] = np.where(corner, score, 0)
    return mask, smap


def fast_detect(img: np.ndarray, t: int) -> list[tuple[int, int, int]]:
    """FAST corners after 3x3 non-maximum suppression on the arc score.

    A corner survives when no neighbor scores higher; among equal scores
    the earliest pixel in raster order wins. Results are (x, y, score) in
    raster order.
    """
    mask, score = fast_corner_scores(img, t)
    if not mask.any():
        return []
    h, w = score.shape
    suppressed = np.zeros_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nscore = np.zeros_like(score)
            ys0, ys1 = max(0, -dy), min(h, h - dy)
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            nscore[ys0:ys1, xs0:xs1] = score[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx]
            precedes = dy < 0 or (dy == 0 and dx < 0)
            if precedes:
                suppressed |= (nscore > score) | ((nscore == score) & (nscore > 0))
            else:
                suppressed |= nscore > score
    keep = mask & ~suppressed
    ys, xs = np.nonzero(keep)
    return [(int(x), int(y), int(score[y, x])) for y, x in zip(ys, xs)]


# ---------------------------------------------------------------------------
# Harris corner measure
# ---------------------------------------------------------------------------

def _sobel_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full-image Sobel gradients with edge-replicated borders."""
    p = np.pad(img.astype(np.float64), 1, mode="edge")
    h, w = img.shape
    right = p[0:h, 2:] + 2.0 * p[1:h + 1, 2:] + p[2:h + 2, 2:]
    left = p[0:h, :w] + 2.0 * p[1:h + 1, :w] + p[2:h + 2, :w]
    ix = right - left
    bottom = p[2:h + 2, 0:w] + 2.0 * p[2:h + 2, 1:w + 1] + p[2:h + 2, 2:]
    top = p[0:h, 0:w] + 2.0 * p[0:h, 1:w + 1] + p[0:h, 2:]
    iy = bottom - top
    return ix, iy


def harris_responses(img: np.ndarray, xs, ys, kappa: float = HARRIS_KAPPA) -> np.ndarray:
    """det(M) - kappa * trace(M)^2 of the Sobel structure tensor, 7x7 window."""
    img = _as_gray(img)
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    m = HARRIS_HALF
    if xs.size and (xs.min() < m or xs.max() > w - 1 - m
                    or ys.min() < m or ys.max() > h - 1 - m):
        raise OutOfBoundsError("a 7x7 Harris window does not fit inside the image")
    ix, iy = _sobel_gradients(img)
    ixx, iyy, ixy = ix * ix, iy * iy, ix * iy
    sxx = np.zeros(xs.shape, dtype=np.float64)
    syy = np.zeros(xs.shape, dtype=np.float64)
    sxy = np.zeros(xs.shape, dtype=np.float64)
    for dy in range(-m, m + 1):
        for dx in range(-m, m + 1):
            sxx += ixx[ys + dy, xs + dx]
            syy += iyy[ys + dy, xs + dx]
            sxy += ixy[ys + dy, xs + dx]
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    return det - kappa * trace * trace


def harris_response(img: np.ndarray, x: int, y: int, kappa: float = HARRIS_KAPPA) -> float:
    return float(harris_responses(img, [x], [y], kappa)[0])


# ---------------------------------------------------------------------------
# orientation by intensity centroid
# ---------------------------------------------------------------------------

def _orientations(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, r: int) -> np.ndarray:
    """Batched intensity-centroid angles in [0, 2*pi)."""
    h, w = img.shape
    if xs.size and (xs.min() < r or xs.max() > w - 1 - r
                    or ys.min() < r or ys.max() > h - 1 - r):
        raise OutOfBoundsError(f"orientation disc of radius {r} leaves the image")
    us, vs = _disc_offsets(r)
    vals = img[ys[:, None] + vs[None, :], xs[:, None] + us[None, :]].astype(np.int64)
    m10 = vals @ us
    m01 = vals @ vs
    theta = np.arctan2(m01.astype(np.float64), m10.astype(np.float64))
    theta[theta < 0] += 2.0 * math.pi
    return theta


def compute_orientation(img: np.ndarray, x: int, y: int, r: int) -> float:
    """Angle of the vector from (x, y) to the patch intensity centroid.

    Moments m10 = sum(u * I), m01 = sum(v * I) over the disc u^2 + v^2 <= r^2;
    v grows downward. A zero centroid offset yields 0 by convention.
    """
    img = _as_gray(img)
    return float(_orientations(img,
                               np.asarray([x], dtype=np.int64),
                               np.asarray([y], dtype=np.int64), r)[0])


def patch_moments(img: np.ndarray, x: int, y: int, r: int) -> tuple[float, float, float]:
    """(m00, m10, m01) intensity moments over the disc of radius r."""
    img = _as_gray(img)
    h, w = img.shape
    if x < r or x > w - 1 - r or y < r or y > h - 1 - r:
        raise OutOfBoundsError(f"moment disc of radius {r} leaves the image")
    us, vs = _disc_offsets(r)
    vals = img[y + vs, x + us].astype(np.int64)
    return float(vals.sum()), float(vals @ us), float(vals @ vs)


# ---------------------------------------------------------------------------
# pattern steering
# ---------------------------------------------------------------------------

def snap_theta_bin(theta: float) -> int:
    """Nearest 12-degree bin index, wrapping into 0..29."""
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    return int(math.floor(theta / _STEER_STEP + 0.5)) % STEER_BINS


def _rotate_tests(tests: np.ndarray, bin_index: int, radius: int) -> np.ndarray:
    ang = bin_index * _STEER_STEP
    c, s = math.cos(ang), math.sin(ang)
    pts = tests.astype(np.float64)
    out = np.empty_like(tests)
    for off in (0, 2):
        x, y = pts[:, off], pts[:, off + 1]
        out[:, off] = _round_half_away(x * c - y * s).astype(np.int64)
        out[:, off + 1] = _round_half_away(x * s + y * c).astype(np.int64)
    return np.clip(out, -radius, radius)


def steer_pattern(base: BriefPattern, theta: float) -> BriefPattern:
    """Pattern rotated by theta snapped to the nearest 12-degree bin."""
    b = snap_theta_bin(theta)
    return BriefPattern(tests=_rotate_tests(base.tests, b, base.radius),
                        radius=base.radius, meta=dict(base.meta, steer_bin=b))


def build_steer_lut(base: BriefPattern) -> SteerLut:
    """All 30 rotated copies, so steering is a table lookup at compute time."""
    bins = np.stack([_rotate_tests(base.tests, b, base.radius)
                     for b in range(STEER_BINS)])
    return SteerLut(bins=bins, radius=base.radius)


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

def _describe_batch(integral: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                    bins: np.ndarray, lut: SteerLut) -> np.ndarray:
    """Packed descriptors for keypoints at integer level coordinates."""
    pats = lut.bins[bins]  # (k, n, 4)
    s1 = _box_sums(integral, xs[:, None] + pats[:, :, 0], ys[:, None] + pats[:, :, 1])
    s2 = _box_sums(integral, xs[:, None] + pats[:, :, 2], ys[:, None] + pats[:, :, 3])
    bits = (s1 < s2).astype(np.uint8)
    return np.packbits(bits, axis=1, bitorder="little")


def compute_descriptor(img: np.ndarray, kp: Keypoint, lut: SteerLut,
                       params: OrbParams) -> np.ndarray:
    """256 smoothed point comparisons packed LSB-first into 32 octets.

    Bit i is 1 iff the 5x5 box mean at the first steered point is strictly
    below the mean at the second; equality gives 0. img must be the
    keypoint's own pyramid level.
    """
    img = _as_gray(img)
    h, w = img.shape
    if lut.radius > params.moment_radius:
        raise ValueError(
            f"pattern radius {lut.radius} exceeds the patch radius "
            f"{params.moment_radius}"
        )
    scale = params.scale_factor ** kp.octave
    x = int(math.floor(kp.x / scale + 0.5))
    y = int(math.floor(kp.y / scale + 0.5))
    m = params.edge_margin
    if x < m or x > w - 1 - m or y < m or y > h - 1 - m:
        raise OutOfBoundsError(
            f"descriptor patch at ({x}, {y}) leaves the {w}x{h} level image"
        )
    integral = integral_image(img)
    bins = np.asarray([snap_theta_bin(kp.theta)])
    return _describe_batch(integral, np.asarray([x]), np.asarray([y]), bins, lut)[0]


def compute_descriptors(
    img: np.ndarray,
    keypoints: list[Keypoint],
    params: OrbParams,
    pattern: BriefPattern | None = None,
    lut: SteerLut | None = None,
) -> np.ndarray:
    """Descriptors for externally supplied keypoints, batched per level.

    Each keypoint's stored theta is used as-is (no re-orientation), so a
    caller can recompute, transfer, or zero orientations before calling.
    Rows align with the keypoint list. Raises OutOfBoundsError when a
    footprint leaves its pyramid level.
    """
    img = _as_gray(img)
    if pattern is None and lut is None:
        pattern = default_pattern(DEFAULT_PATTERN_SEED, params)
    if lut is None:
        lut = build_steer_lut(pattern)
    if lut.radius > params.moment_radius:
        raise ValueError(
            f"pattern radius {lut.radius} exceeds the patch radius "
            f"{params.moment_radius}"
        )

    levels = build_pyramid(img, params)
    out = np.empty((len(keypoints), lut.bins.shape[1] // 8), dtype=np.uint8)
    by_octave: dict[int, list[int]] = {}
    for i, kp in enumerate(keypoints):
        by_octave.setdefault(kp.octave, []).append(i)
    m = params.edge_margin
    for octave, idxs in sorted(by_octave.items()):
        if not 0 <= octave < len(levels):
            raise OutOfBoundsError(
                f"octave {octave} is beyond the {len(levels)}-level pyramid"
            )
        level = levels[octave]
        h, w = level.shape
        scale = params.scale_factor ** octave
        xs = np.asarray([int(math.floor(keypoints[i].x / scale + 0.5))
                         for i in idxs], dtype=np.int64)
        ys = np.asarray([int(math.floor(keypoints[i].y / scale + 0.5))
                         for i in idxs], dtype=np.int64)
        if (xs.min() < m or xs.max() > w - 1 - m
                or ys.min() < m or ys.max() > h - 1 - m):
            raise OutOfBoundsError(
                f"a descriptor patch leaves the {w}x{h} level-{octave} image"
            )
        bins = np.asarray([snap_theta_bin(keypoints[i].theta) for i in idxs],
                          dtype=np.int64)
        descs = _describe_batch(integral_image(level), xs, ys, bins, lut)
        for k, i in enumerate(idxs):
            out[i] = descs[k]
    return out


# ---------------------------------------------------------------------------
# patterns: seeded Gaussian fallback and greedy learning
# ---------------------------------------------------------------------------

def default_pattern(seed: int, params: OrbParams) -> BriefPattern:
    """Seeded Gaussian test points (sigma = patch_size / 5) inside the disc.

    Draws landing outside the radius are redrawn so steering never clamps;
    the same seed always yields the same pattern.
    """
    rng = np.random.default_rng(seed)
    r = params.moment_radius
    sigma = params.patch_size / 5.0

    def draw() -> tuple[int, int]:
        while True:
            gx, gy = rng.normal(0.0, sigma, size=2)
            xi = int(math.copysign(math.floor(abs(gx) + 0.5), gx))
            yi = int(math.copysign(math.floor(abs(gy) + 0.5), gy))
            if xi * xi + yi * yi <= r * r:
                return xi, yi

    tests = np.empty((params.n_tests, 4), dtype=np.int64)
    for i in range(params.n_tests):
        x1, y1 = draw()
        x2, y2 = draw()
        tests[i] = (x1, y1, x2, y2)
    return BriefPattern(tests=tests, radius=r,
                        meta={"provenance": "gaussian", "seed": seed})


def _candidate_grid(r: int) -> np.ndarray:
    """Stride-2 lattice restricted to the orientation disc."""
    pts = [(u, v)
           for v in range(-r, r + 1, 2)
           for u in range(-r, r + 1, 2)
           if u * u + v * v <= r * r]
    return np.asarray(pts, dtype=np.int64)


def learn_rbrief(patches: list[np.ndarray], params: OrbParams,
                 corr_threshold: float = 0.2) -> BriefPattern:
    """Greedy test selection: means near 0.5 first, low mutual correlation.

    Candidates are unordered point pairs from the stride-2 disc grid. They
    are ranked by |mean - 0.5| over the patch set; a candidate is accepted
    iff its absolute Pearson correlation with every accepted test stays
    below the threshold. The threshold relaxes by +0.05 (capped at 1.0)
    whenever a full pass cannot reach n_tests. Constant-outcome candidates
    count as fully correlated and are never selected.
    """
    n_patches = len(patches)
    if n_patches < 1000:
        raise InsufficientPatchesError(
            f"pattern learning needs >= 1000 patches, got {n_patches}"
        )
    r = params.moment_radius
    margin = params.edge_margin
    grid = _candidate_grid(r)
    n_grid = grid.shape[0]

    values = np.empty((n_patches, n_grid), dtype=np.int64)
    for p, patch in enumerate(patches):
        patch = _as_gray(patch)
        h, w = patch.shape
        cx, cy = w // 2, h // 2
        if cx < margin or cx > w - 1 - margin or cy < margin or cy > h - 1 - margin:
            raise OutOfBoundsError(
                f"patch {p} ({w}x{h}) cannot host the {2 * margin + 1} px footprint"
            )
        integral = integral_image(patch)
        values[p] = _box_sums(integral, cx + grid[:, 0], cy + grid[:, 1])

    idx_i, idx_j = np.triu_indices(n_grid, k=1)
    outcomes = (values[:, idx_i] < values[:, idx_j]).astype(np.uint8)
    ones = outcomes.sum(axis=0, dtype=np.int64)
    deviation = np.abs(ones / n_patches - 0.5)
    order = np.argsort(deviation, kind="stable")
    degenerate = (ones == 0) | (ones == n_patches)

    n = params.n_tests
    accepted: list[int] = []
    acc_cols = np.empty((n_patches, n), dtype=np.int64)
    acc_ones = np.empty(n, dtype=np.int64)
    threshold = float(corr_threshold)
    selected = np.zeros(len(order), dtype=bool)

    while True:
        for c in order:
            if len(accepted) >= n:
                break
            c = int(c)
            if selected[c] or degenerate[c]:
                continue
            col = outcomes[:, c].astype(np.int64)
            if accepted:
                k = len(accepted)
                n12 = acc_cols[:, :k].T @ col
                num = n_patches * n12 - acc_ones[:k] * ones[c]
                den = (np.sqrt(acc_ones[:k] * (n_patches - acc_ones[:k]))
                       * math.sqrt(ones[c] * (n_patches - ones[c])))
                if np.abs(num / den).max() >= threshold:
                    continue
            acc_cols[:, len(accepted)] = col
            acc_ones[len(accepted)] = ones[c]
            accepted.append(c)
            selected[c] = True
        if len(accepted) >= n:
            break
        if threshold >= 1.0:
            raise PoolExhaustedError(
                f"only {len(accepted)} of {n} tests reachable even at |corr| < 1.0"
            )
        threshold = min(threshold + 0.05, 1.0)

    pairs = np.stack([idx_i[accepted], idx_j[accepted]], axis=1)
    tests = np.concatenate([grid[pairs[:, 0]], grid[pairs[:, 1]]], axis=1)
    window = float(np.max(deviation[accepted]))
    return BriefPattern(
        tests=tests, radius=r,
        meta={"provenance": "rbrief", "final_threshold": threshold,
              "mean_window": window, "n_patches": n_patches},
    )


# ---------------------------------------------------------------------------
# pattern files: '#' header, then one `x1 y1 x2 y2` line per test
# ---------------------------------------------------------------------------

def save_pattern(pattern: BriefPattern, path: str | Path) -> None:
    lines = ["# signfeat brief pattern",
             f"# patch_size={2 * pattern.radius + 1} n_tests={pattern.n_tests}"]
    if pattern.meta:
        extras = " ".join(f"{k}={pattern.meta[k]}" for k in sorted(pattern.meta))
        lines.append(f"# {extras}")
    lines.extend(" ".join(str(v) for v in row) for row in pattern.tests)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_pattern(path: str | Path) -> BriefPattern:
    path = Path(path)
    patch_size = None
    n_tests = None
    rows = []
    for raw in path.read_text(encoding="ascii").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                key, _, value = token.partition("=")
                if key == "patch_size":
                    patch_size = int(value)
                elif key == "n_tests":
                    n_tests = int(value)
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed test line {raw!r}")
        rows.append([int(v) for v in parts])
    if patch_size is None or n_tests is None:
        raise ValueError(f"{path}: header must record patch_size and n_tests")
    if len(rows) != n_tests:
        raise ValueError(f"{path}: expected {n_tests} tests, found {len(rows)}")
    radius = (patch_size - 1) // 2
    return BriefPattern(tests=np.asarray(rows, dtype=np.int64), radius=radius,
                        meta={"provenance": f"file:{path.name}"})


# ---------------------------------------------------------------------------
# full extraction
# ---------------------------------------------------------------------------

def detect_and_compute(
    img: np.ndarray,
    params: OrbParams,
    pattern: BriefPattern | None = None,
    lut: SteerLut | None = None,
) -> list[tuple[Keypoint, np.ndarray]]:
    """FAST on every pyramid level, Harris top-N, orient, describe.

    Keypoints whose descriptor footprint leaves their level are dropped
    before ranking. Survivors are ordered by (response desc, octave, y, x)
    and the top n_features are described. Coordinates are reported in
    level-0 units. Returns an empty list when nothing passes.
    """
    img = _as_gray(img)
    if pattern is None and lut is None:
        pattern = default_pattern(DEFAULT_PATTERN_SEED, params)
    if lut is None:
        lut = build_steer_lut(pattern)
    if lut.radius > params.moment_radius:
        raise ValueError(
            f"pattern radius {lut.radius} exceeds the patch radius "
            f"{params.moment_radius}"
        )

    levels = build_pyramid(img, params)
    margin = params.edge_margin
    candidates = []  # (octave, x, y, response)
    for octave, level in enumerate(levels):
        h, w = level.shape
        corners = fast_detect(level, params.fast_threshold)
        pts = [(x, y) for x, y, _ in corners
               if margin <= x <= w - 1 - margin and margin <= y <= h - 1 - margin]
        if not pts:
            continue
        xs = np.asarray([p[0] for p in pts], dtype=np.int64)
        ys = np.asarray([p[1] for p in pts], dtype=np.int64)
        resp = harris_responses(level, xs, ys)
        candidates.extend(
            (octave, int(x), int(y), float(v)) for x, y, v in zip(xs, ys, resp)
        )
    if not candidates:
        return []

    candidates.sort(key=lambda c: (-c[3], c[0], c[2], c[1]))
    top = candidates[:params.n_features]

    r = params.moment_radius
    results: list = [None] * len(top)
    by_octave: dict[int, list[int]] = {}
    for rank, cand in enumerate(top):
        by_octave.setdefault(cand[0], []).append(rank)
    for octave, ranks in sorted(by_octave.items()):
        level = levels[octave]
        xs = np.asarray([top[i][1] for i in ranks], dtype=np.int64)
        ys = np.asarray([top[i][2] for i in ranks], dtype=np.int64)
        thetas = _orientations(level, xs, ys, r)
        bins = np.asarray([snap_theta_bin(t) for t in thetas], dtype=np.int64)
        descs = _describe_batch(integral_image(level), xs, ys, bins, lut)
        scale = params.scale_factor ** octave
        for k, rank in enumerate(ranks):
            kp = Keypoint(x=float(xs[k]) * scale, y=float(ys[k]) * scale,
                          octave=octave, response=top[rank][3],
                          theta=float(thetas[k]))
            results[rank] = (kp, descs[k])
    return results


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Bits that differ between two packed descriptors."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    return int(_POPCOUNT[a ^ b].sum())


def match_hamming(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int, int]]:
    """Nearest neighbor in b for every descriptor in a, ties to lowest index."""
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    b = np.atleast_2d(np.asarray(b, dtype=np.uint8))
    if a.size == 0 or b.size == 0:
        return []
    matches = []
    block = 256
    for start in range(0, a.shape[0], block):
        chunk = a[start:start + block]
        dists = _POPCOUNT[chunk[:, None, :] ^ b[None, :, :]].sum(
            axis=2, dtype=np.int32
        )
        best = dists.argmin(axis=1)
        for i, j in enumerate(best):
            matches.append((start + i, int(j), int(dists[i, j])))
    return matches
