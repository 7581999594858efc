"""Greedy pattern learning: mean/correlation bounds, determinism, errors."""

import numpy as np
import pytest

from signfeat import OrbParams, learn_rbrief
from signfeat.errors import InsufficientPatchesError, PoolExhaustedError
from signfeat.orb import _candidate_grid

from oracles import box5_oracle, pearson_oracle


def _outcome_matrix(patches, tests):
    """Recompute test outcomes with the naive box-sum oracle."""
    out = np.zeros((len(patches), len(tests)), dtype=np.float64)
    for pi, patch in enumerate(patches):
        cy, cx = patch.shape[0] // 2, patch.shape[1] // 2
        for ti, (x1, y1, x2, y2) in enumerate(tests):
            s1 = box5_oracle(patch, cx + int(x1), cy + int(y1))
            s2 = box5_oracle(patch, cx + int(x2), cy + int(y2))
            out[pi, ti] = 1.0 if s1 < s2 else 0.0
    return out


@pytest.fixture(scope="module")
def learned(brief_patches):
    params = OrbParams(n_tests=64)  # smaller test count keeps the oracle cheap
    return learn_rbrief(brief_patches, params), brief_patches, params


def test_learned_pattern_shape(learned):
    pattern, _, params = learned
    assert pattern.tests.shape == (64, 4)
    assert np.abs(pattern.tests).max() <= pattern.radius
    assert pattern.meta["provenance"] == "rbrief"


def test_tests_are_distinct_grid_pairs(learned):
    pattern, _, params = learned
    grid = {tuple(p) for p in _candidate_grid(params.moment_radius)}
    seen = set()
    for x1, y1, x2, y2 in pattern.tests:
        assert (int(x1), int(y1)) in grid
        assert (int(x2), int(y2)) in grid
        key = (int(x1), int(y1), int(x2), int(y2))
        assert key not in seen
        seen.add(key)


def test_means_and_correlations_verified_by_oracle(learned):
    pattern, patches, _ = learned
    outcomes = _outcome_matrix(patches, pattern.tests)
    means = outcomes.mean(axis=0)
    window = pattern.meta["mean_window"]
    assert np.abs(means - 0.5).max() <= window + 1e-12

    threshold = pattern.meta["final_threshold"]
    n = outcomes.shape[1]
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            worst = max(worst, abs(pearson_oracle(outcomes[:, i], outcomes[:, j])))
    assert worst < threshold


def test_deterministic(brief_patches):
    params = OrbParams(n_tests=32)
    a = learn_rbrief(brief_patches, params)
    b = learn_rbrief(brief_patches, params)
    assert np.array_equal(a.tests, b.tests)
    assert a.meta["final_threshold"] == b.meta["final_threshold"]


def test_too_few_patches():
    patches = [np.zeros((35, 35), dtype=np.uint8)] * 999
    with pytest.raises(InsufficientPatchesError):
        learn_rbrief(patches, OrbParams())


def test_degenerate_patches_exhaust_pool():
    patches = [np.zeros((35, 35), dtype=np.uint8)] * 1000
    with pytest.raises(PoolExhaustedError):
        learn_rbrief(patches, OrbParams())


def test_small_patch_rejected(brief_patches):
    bad = [np.zeros((20, 20), dtype=np.uint8)] + list(brief_patches)
    with pytest.raises(Exception, match="footprint"):
        learn_rbrief(bad, OrbParams())
