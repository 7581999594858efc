"""Independent reference implementations used to check the library.

Everything here favors obviousness over speed: explicit loops, exact
rational arithmetic where ties matter, and no sharing of code with the
package under test beyond its documented conventions.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

CIRCLE16 = [
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
]


# ---------------------------------------------------------------------------
# FAST segment test + suppression
# ---------------------------------------------------------------------------

def _max_circular_run(flags: list[bool]) -> int:
    run = best = 0
    for f in flags + flags:
        run = run + 1 if f else 0
        best = max(best, run)
    return min(best, len(flags))


def fast_oracle(img: np.ndarray, t: int) -> list[tuple[int, int, int]]:
    """Brute-force 9-of-16 segment test with 3x3 raster-order suppression.

    Two sound screens keep this tractable without changing the result: an
    arc of 9 uniformly brighter pixels implies (a) at least 9 brighter
    pixels in total and (b) a circular run of 9 consecutive brighter
    pixels, so candidates failing either necessary condition are discarded
    before the exhaustive per-arc scoring.
    """
    h, w = img.shape
    signed = img.astype(np.int32)
    center = signed[3:h - 3, 3:w - 3]
    bright_n = np.zeros(center.shape, dtype=np.int32)
    dark_n = np.zeros(center.shape, dtype=np.int32)
    for dx, dy in CIRCLE16:
        ring = signed[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx]
        bright_n += ring > center + t
        dark_n += ring < center - t
    cand_y, cand_x = np.nonzero((bright_n >= 9) | (dark_n >= 9))

    scores: dict[tuple[int, int], int] = {}
    for yy, xx in zip(cand_y + 3, cand_x + 3):
        c = int(signed[yy, xx])
        ring = [int(signed[yy + dy, xx + dx]) for dx, dy in CIRCLE16]
        ring2 = ring + ring
        best = None
        bright = [v > c + t for v in ring]
        if _max_circular_run(bright) >= 9:
            b2 = bright + bright
            for s in range(16):
                if all(b2[s:s + 9]):
                    m = min(ring2[s:s + 9]) - c
                    best = m if best is None else max(best, m)
        dark = [v < c - t for v in ring]
        if _max_circular_run(dark) >= 9:
            d2 = dark + dark
            for s in range(16):
                if all(d2[s:s + 9]):
                    m = c - max(ring2[s:s + 9])
                    best = m if best is None else max(best, m)
        if best is not None:
            scores[(int(xx), int(yy))] = best

    kept = []
    for (x, y), sc in scores.items():
        suppressed = False
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                other = scores.get((x + dx, y + dy))
                if other is None:
                    continue
                if other > sc:
                    suppressed = True
                elif other == sc and (dy < 0 or (dy == 0 and dx < 0)):
                    suppressed = True
        if not suppressed:
            kept.append((x, y, sc))
    kept.sort(key=lambda p: (p[1], p[0]))
    return kept


# ---------------------------------------------------------------------------
# Harris measure
# ---------------------------------------------------------------------------

def harris_oracle(img: np.ndarray, x: int, y: int, kappa: float = 0.04) -> float:
    h, w = img.shape

    def px(yy: int, xx: int) -> float:
        return float(img[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)])

    def sobel(yy: int, xx: int) -> tuple[float, float]:
        gx = (px(yy - 1, xx + 1) + 2 * px(yy, xx + 1) + px(yy + 1, xx + 1)
              - px(yy - 1, xx - 1) - 2 * px(yy, xx - 1) - px(yy + 1, xx - 1))
        gy = (px(yy + 1, xx - 1) + 2 * px(yy + 1, xx) + px(yy + 1, xx + 1)
              - px(yy - 1, xx - 1) - 2 * px(yy - 1, xx) - px(yy - 1, xx + 1))
        return gx, gy

    sxx = syy = sxy = 0.0
    for dy in range(-3, 4):
        for dx in range(-3, 4):
            gx, gy = sobel(y + dy, x + dx)
            sxx += gx * gx
            syy += gy * gy
            sxy += gx * gy
    return (sxx * syy - sxy * sxy) - kappa * (sxx + syy) ** 2


# ---------------------------------------------------------------------------
# intensity-centroid orientation
# ---------------------------------------------------------------------------

def orientation_oracle(img: np.ndarray, x: int, y: int, r: int) -> float:
    m10 = 0
    m01 = 0
    for v in range(-r, r + 1):
        for u in range(-r, r + 1):
            if u * u + v * v <= r * r:
                val = int(img[y + v, x + u])
                m10 += u * val
                m01 += v * val
    theta = math.atan2(m01, m10)
    return theta + 2 * math.pi if theta < 0 else theta


# ---------------------------------------------------------------------------
# descriptor bits
# ---------------------------------------------------------------------------

def box5_oracle(img: np.ndarray, x: int, y: int) -> int:
    total = 0
    for v in range(-2, 3):
        for u in range(-2, 3):
            total += int(img[y + v, x + u])
    return total


def descriptor_oracle(img: np.ndarray, x: int, y: int, theta: float,
                      tests: np.ndarray, radius: int) -> np.ndarray:
    """Steered binary tests, packed LSB-first, straight from the contract."""
    step = 2 * math.pi / 30
    b = int(math.floor(theta / step + 0.5)) % 30
    ang = b * step
    c, s = math.cos(ang), math.sin(ang)

    def rot(px: float, py: float) -> tuple[int, int]:
        rx = px * c - py * s
        ry = px * s + py * c
        ix = int(math.copysign(math.floor(abs(rx) + 0.5), rx))
        iy = int(math.copysign(math.floor(abs(ry) + 0.5), ry))
        return (max(-radius, min(radius, ix)), max(-radius, min(radius, iy)))

    bits = []
    for x1, y1, x2, y2 in tests:
        (ax, ay), (bx, by) = rot(x1, y1), rot(x2, y2)
        bits.append(1 if box5_oracle(img, x + ax, y + ay)
                    < box5_oracle(img, x + bx, y + by) else 0)
    packed = np.zeros(len(bits) // 8, dtype=np.uint8)
    for i, bit in enumerate(bits):
        packed[i // 8] |= bit << (i % 8)
    return packed


def pearson_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Plain-definition correlation of two binary outcome columns."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    am, bm = a - a.mean(), b - b.mean()
    denom = math.sqrt(float((am * am).sum()) * float((bm * bm).sum()))
    return float((am * bm).sum()) / denom


def hamming_oracle(d1: np.ndarray, d2: np.ndarray) -> int:
    total = 0
    for a, b in zip(d1, d2):
        total += bin(int(a) ^ int(b)).count("1")
    return total


# ---------------------------------------------------------------------------
# k-means global optimum by partition enumeration
# ---------------------------------------------------------------------------

def kmeans_optimum(points: np.ndarray, k: int) -> float:
    """Exact minimum inertia over all assignments of <= 8 points."""
    n = points.shape[0]
    best = math.inf
    for assign in itertools.product(range(k), repeat=n):
        if len(set(assign)) < k:
            continue
        total = 0.0
        for j in range(k):
            members = points[[i for i in range(n) if assign[i] == j]]
            mean = members.mean(axis=0)
            total += float(((members - mean) ** 2).sum())
        best = min(best, total)
    return best


# ---------------------------------------------------------------------------
# exact CART split search
# ---------------------------------------------------------------------------

def gini_fraction(counts) -> Fraction:
    s = sum(int(v) for v in counts)
    return Fraction(s * s - sum(int(v) ** 2 for v in counts), s * s)


def best_split_oracle(x: np.ndarray, y: np.ndarray):
    """Exhaustive exact-rational split search with the documented tie rule."""
    n, n_features = x.shape
    labels = sorted(set(int(v) for v in y))
    best = None  # (gini, feature, threshold) all exact
    for f in range(n_features):
        values = sorted(set(Fraction(float(v)) for v in x[:, f]))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            left = [int(y[i]) for i in range(n) if Fraction(float(x[i, f])) <= thr]
            right = [int(y[i]) for i in range(n) if Fraction(float(x[i, f])) > thr]
            lc = [left.count(c) for c in labels]
            rc = [right.count(c) for c in labels]
            g = (len(left) * gini_fraction(lc)
                 + len(right) * gini_fraction(rc)) / n
            key = (g, f, thr)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    parent = gini_fraction([int((y == c).sum()) for c in labels])
    if not best[0] < parent:
        return None
    return best[1], float(best[2]), float(best[0])
