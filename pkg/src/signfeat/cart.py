"""CART decision tree over integer feature vectors, Gini splits.

Splits scan every feature and every midpoint between consecutive distinct
sorted values. The scoring scan runs in floating point; candidates within
1e-9 relative of the running minimum are re-ranked in exact rational
arithmetic, so ties break identically to an exhaustive exact oracle:
lowest weighted Gini, then lowest feature index, then lowest threshold.

Leaves predict the argmax class, ties to the lowest id. Depth tuning uses
a seeded stratified 80/20 split and returns the smallest depth achieving
the best held-out accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    ClassTooSmallError,
    DimensionMismatchError,
    EmptyEvaluationSetError,
    EmptyNodeError,
    EmptyTrainingSetError,
    LabelOutOfRangeError,
)

DEFAULT_DEPTH_RANGE = range(1, 21)
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class Leaf:
    """Terminal node: class_counts of the training samples that reached it."""

    class_counts: np.ndarray  # (C,) int64
    predicted: int

    def __post_init__(self):
        object.__setattr__(self, "class_counts",
                           np.asarray(self.class_counts, dtype=np.int64))


@dataclass(frozen=True)
class Decision:
    """Internal node: samples with feature <= threshold go left."""

    feature: int
    threshold: float
    left: "Decision | Leaf"
    right: "Decision | Leaf"


@dataclass(frozen=True)
class DecisionTree:
    root: Decision | Leaf
    max_depth: int
    n_classes: int
    n_features: int
    n_samples: int
    split_seed: int | None = None


def gini(class_counts) -> float:
    """Impurity 1 - sum(p_i^2), computed as (s^2 - sum(c^2)) / s^2.

    The all-integer numerator and denominator make the analytic cases
    (0, 1/2, 2/3, ...) land on their correctly rounded floats.
    """
    counts = np.asarray(class_counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise ValueError(f"counts must be non-negative, got {counts.tolist()}")
    s = int(counts.sum())
    if s == 0:
        raise EmptyNodeError("gini of an empty node is undefined")
    ssq = int((counts.astype(object) ** 2).sum())
    return (s * s - ssq) / (s * s)


def _exact_weighted_gini(left_counts, right_counts) -> Fraction:
    nl = int(sum(left_counts))
    nr = int(sum(right_counts))
    n = nl + nr
    ssq_l = sum(int(c) ** 2 for c in left_counts)
    ssq_r = sum(int(c) ** 2 for c in right_counts)
    return (Fraction(nl * nl - ssq_l, nl) + Fraction(nr * nr - ssq_r, nr)) / n


def best_split(x, y, n_classes: int | None = None):
    """Best (feature, threshold, weighted_gini) or None.

    Thresholds are midpoints of consecutive distinct sorted values. None is
    returned when no feature varies or no candidate strictly reduces the
    parent impurity.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, n_features = x.shape
    if n < 2:
        return None
    c = int(n_classes) if n_classes is not None else int(y.max()) + 1

    one_hot = np.zeros((n, c), dtype=np.int64)
    one_hot[np.arange(n), y] = 1
    total = one_hot.sum(axis=0)

    # float scan, collecting candidates near the running global minimum
    near: list[tuple[int, float, int]] = []  # (feature, threshold, n_left)
    best_g = math.inf
    per_feature = []
    for f in range(n_features):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        cum = np.cumsum(one_hot[order], axis=0)
        cut = np.nonzero(xs[:-1] < xs[1:])[0]  # split after sorted index i
        per_feature.append((xs, cum, cut))
        if cut.size == 0:
            continue
        nl = (cut + 1).astype(np.float64)
        nr = n - nl
        left = cum[cut]
        right = total[None, :] - left
        g = ((nl - (left * left).sum(axis=1) / nl)
             + (nr - (right * right).sum(axis=1) / nr)) / n
        best_g = min(best_g, float(g.min()))
    if math.isinf(best_g):
        return None
    window = 1e-9 * max(1.0, abs(best_g))
    for f, (xs, cum, cut) in enumerate(per_feature):
        if cut.size == 0:
            continue
        nl = (cut + 1).astype(np.float64)
        nr = n - nl
        left = cum[cut]
        right = total[None, :] - left
        g = ((nl - (left * left).sum(axis=1) / nl)
             + (nr - (right * right).sum(axis=1) / nr)) / n
        for i in np.nonzero(g <= best_g + window)[0]:
            pos = int(cut[i])
            thr = (xs[pos] + xs[pos + 1]) / 2.0
            near.append((f, float(thr), pos + 1))

    # exact re-ranking of the near-minimal candidates
    parent = Fraction(n * n - sum(int(v) ** 2 for v in total), n * n)
    best = None
    for f, thr, n_left in near:
        xs, cum, _ = per_feature[f]
        left_counts = cum[n_left - 1]
        right_counts = total - left_counts
        exact = _exact_weighted_gini(left_counts, right_counts)
        key = (exact, f, Fraction(thr))
        if best is None or key < best[0]:
            best = (key, f, thr, exact)
    if not best[3] < parent:
        return None
    return best[1], best[2], float(best[3])


def _majority(counts: np.ndarray) -> int:
    return int(np.argmax(counts))


def fit(x, y, max_depth: int, min_samples_split: int = 2,
        n_classes: int | None = None, split_seed: int | None = None) -> DecisionTree:
    """Grow a tree by recursive splitting.

    A node becomes a Leaf when it is pure, at max_depth decisions along its
    path, holds fewer than min_samples_split samples, or no split reduces
    impurity.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2:
        raise ValueError(f"x must be (n, features), got shape {x.shape}")
    n, n_features = x.shape
    if n == 0:
        raise EmptyTrainingSetError("cannot fit a tree on zero samples")
    if y.shape != (n,):
        raise ValueError(f"y shape {y.shape} does not match {n} samples")
    c = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= c:
        raise LabelOutOfRangeError(
            f"labels must lie in 0..{c - 1}, got range {y.min()}..{y.max()}"
        )
    if max_depth < 0:
        raise ValueError(f"max_depth must be >= 0, got {max_depth}")

    def grow(idx: np.ndarray, depth: int) -> Decision | Leaf:
        counts = np.bincount(y[idx], minlength=c)
        if (depth >= max_depth or idx.size < min_samples_split
                or int(counts.max()) == idx.size):
            return Leaf(class_counts=counts, predicted=_majority(counts))
        found = best_split(x[idx], y[idx], n_classes=c)
        if found is None:
            return Leaf(class_counts=counts, predicted=_majority(counts))
        f, thr, _ = found
        mask = x[idx, f] <= thr
        return Decision(feature=f, threshold=thr,
                        left=grow(idx[mask], depth + 1),
                        right=grow(idx[~mask], depth + 1))

    root = grow(np.arange(n), 0)
    return DecisionTree(root=root, max_depth=max_depth, n_classes=c,
                        n_features=n_features, n_samples=n, split_seed=split_seed)


def _route(tree: DecisionTree, v: np.ndarray) -> Leaf:
    node = tree.root
    while isinstance(node, Decision):
        node = node.left if v[node.feature] <= node.threshold else node.right
    return node


def _check_width(tree: DecisionTree, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (tree.n_features,):
        raise DimensionMismatchError(
            f"vector shape {v.shape} does not match {tree.n_features} features"
        )
    return v


def predict(tree: DecisionTree, v) -> int:
    """Class id of the leaf reached by routing v (left iff <= threshold)."""
    return _route(tree, _check_width(tree, v)).predicted


def predict_proba(tree: DecisionTree, v) -> np.ndarray:
    """Per-class training frequencies of the reached leaf."""
    leaf = _route(tree, _check_width(tree, v))
    counts = leaf.class_counts.astype(np.float64)
    return counts / counts.sum()


def stratified_split(y: np.ndarray, split_seed: int,
                     test_fraction: float = TEST_FRACTION
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class holdout; both sides returned in ascending row order.

    Each class contributes max(1, round(n_c * test_fraction)) test samples;
    every class needs at least 2 members so both sides stay populated.
    """
    y = np.asarray(y, dtype=np.int64)
    c = int(y.max()) + 1
    rng = np.random.default_rng(split_seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for label in range(c):
        members = np.nonzero(y == label)[0]
        if members.size < 2:
            raise ClassTooSmallError(
                f"class {label} has {members.size} samples; need >= 2 to split"
            )
        perm = members[rng.permutation(members.size)]
        n_test = max(1, int(math.floor(members.size * test_fraction + 0.5)))
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return train, test


def tune_depth(x, y, depth_range=DEFAULT_DEPTH_RANGE, split_seed: int = 0,
               min_samples_split: int = 2) -> tuple[int, list[tuple[int, float]]]:
    """Fit at every depth on a seeded stratified 80%, score on the 20%.

    Returns the smallest depth achieving the maximum held-out accuracy and
    the full (depth, accuracy) curve.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    train, test = stratified_split(y, split_seed)
    c = int(y.max()) + 1
    curve: list[tuple[int, float]] = []
    best_depth, best_acc = None, -1.0
    for depth in depth_range:
        tree = fit(x[train], y[train], max_depth=depth,
                   min_samples_split=min_samples_split, n_classes=c,
                   split_seed=split_seed)
        acc, _ = evaluate(tree, x[test], y[test])
        curve.append((depth, acc))
        if acc > best_acc:
            best_depth, best_acc = depth, acc
    if best_depth is None:
        raise ValueError("depth_range is empty")
    return best_depth, curve


def evaluate(tree: DecisionTree, x, y) -> tuple[float, np.ndarray]:
    """Accuracy and the C x C confusion matrix (rows true, columns predicted)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise EmptyEvaluationSetError("cannot evaluate on zero samples")
    c = tree.n_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for row, label in zip(x, y):
        confusion[int(label), predict(tree, row)] += 1
    accuracy = float(np.trace(confusion) / x.shape[0])
    return accuracy, confusion


# ---------------------------------------------------------------------------
# persistence: nested-node JSON
# ---------------------------------------------------------------------------

def _node_to_doc(node: Decision | Leaf) -> dict:
    if isinstance(node, Leaf):
        return {"counts": [int(v) for v in node.class_counts],
                "predicted": node.predicted}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": _node_to_doc(node.left), "right": _node_to_doc(node.right)}


def _node_from_doc(doc: dict) -> Decision | Leaf:
    if "counts" in doc:
        return Leaf(class_counts=np.asarray(doc["counts"], dtype=np.int64),
                    predicted=int(doc["predicted"]))
    return Decision(feature=int(doc["feature"]), threshold=float(doc["threshold"]),
                    left=_node_from_doc(doc["left"]),
                    right=_node_from_doc(doc["right"]))


def save_tree(tree: DecisionTree, path: str | Path) -> None:
    doc = {
        "max_depth": tree.max_depth,
        "n_classes": tree.n_classes,
        "n_features": tree.n_features,
        "n_samples": tree.n_samples,
        "split_seed": tree.split_seed,
        "root": _node_to_doc(tree.root),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="ascii")


def load_tree(path: str | Path) -> DecisionTree:
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    seed = doc.get("split_seed")
    return DecisionTree(root=_node_from_doc(doc["root"]),
                        max_depth=int(doc["max_depth"]),
                        n_classes=int(doc["n_classes"]),
                        n_features=int(doc["n_features"]),
                        n_samples=int(doc["n_samples"]),
                        split_seed=None if seed is None else int(seed))
