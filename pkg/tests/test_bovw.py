"""k-means codebook fitting, prediction, encoding, and table persistence."""

import numpy as np
import pytest

from signfeat import (
    Codebook,
    encode_image,
    kmeans_fit,
    kmeans_predict,
    load_codebook,
    read_feature_csv,
    save_codebook,
    write_feature_csv,
)
from signfeat.errors import (
    DimensionMismatchError,
    InvalidKError,
    RaggedRowsError,
    TooFewDistinctPointsError,
)

from oracles import kmeans_optimum


class TestKmeansFit:
    def test_k1_is_the_mean(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 8))
        cb = kmeans_fit(x, 1, seed=0)
        assert cb.centroids.shape == (1, 8)
        assert np.array_equal(cb.centroids[0], x.mean(axis=0))
        want = float(((x - x.mean(axis=0)) ** 2).sum())
        assert cb.inertia == pytest.approx(want, rel=1e-9)

    def test_duplicated_points_recovered_exactly(self):
        base = np.asarray([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        x = np.repeat(base, 7, axis=0)
        cb = kmeans_fit(x, 3, seed=1)
        got = sorted(map(tuple, cb.centroids))
        assert got == sorted(map(tuple, base))
        assert cb.inertia == 0.0

    def test_small_instances_near_optimal(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            n = int(rng.integers(4, 9))
            k = int(rng.integers(1, 4))
            x = rng.normal(size=(n, 2)) * 5
            opt = kmeans_optimum(x, k)
            best = min(kmeans_fit(x, k, seed=s).inertia for s in range(10))
            assert best >= opt - 1e-9 * max(1.0, opt), trial
            assert best <= 1.05 * opt + 1e-9, trial

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(120, 16))
        a = kmeans_fit(x, 6, seed=42)
        b = kmeans_fit(x, 6, seed=42)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.inertia == b.inertia
        assert a.iterations_run == b.iterations_run

    def test_inertia_exact_for_returned_centroids(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(80, 4))
        cb = kmeans_fit(x, 5, seed=0)
        labels = [kmeans_predict(cb, v) for v in x]
        recomputed = sum(float(((x[i] - cb.centroids[labels[i]]) ** 2).sum())
                         for i in range(80))
        assert cb.inertia == pytest.approx(recomputed, rel=1e-12)

    def test_invalid_k(self):
        x = np.zeros((5, 2))
        with pytest.raises(InvalidKError):
            kmeans_fit(x, 0, seed=0)

    def test_too_few_distinct(self):
        x = np.asarray([[1.0, 2.0]] * 5 + [[3.0, 4.0]] * 5)
        with pytest.raises(TooFewDistinctPointsError):
            kmeans_fit(x, 3, seed=0)

    def test_tol_stops_early(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(200, 8))
        loose = kmeans_fit(x, 4, seed=0, tol=1e9)
        tight = kmeans_fit(x, 4, seed=0, tol=0.0)
        assert loose.iterations_run <= tight.iterations_run


class TestKmeansPredict:
    def _cb(self, centroids):
        return Codebook(centroids=np.asarray(centroids, dtype=np.float64),
                        seed=0, iterations_run=0, inertia=0.0)

    def test_exact_centroid_wins(self):
        cb = self._cb([[0, 0], [5, 5], [9, 1]])
        assert kmeans_predict(cb, [5, 5]) == 1

    def test_tie_goes_to_lowest_index(self):
        cb = self._cb([[0.0], [2.0]])
        assert kmeans_predict(cb, [1.0]) == 0

    def test_matches_naive_scan(self):
        rng = np.random.default_rng(6)
        cb = self._cb(rng.normal(size=(7, 5)))
        for _ in range(50):
            v = rng.normal(size=5)
            d2 = [float(((c - v) ** 2).sum()) for c in cb.centroids]
            assert kmeans_predict(cb, v) == int(np.argmin(d2))

    def test_dimension_mismatch(self):
        cb = self._cb([[0.0, 1.0]])
        with pytest.raises(DimensionMismatchError):
            kmeans_predict(cb, [1.0, 2.0, 3.0])


class TestEncodeImage:
    def _cb(self):
        return Codebook(centroids=np.asarray([[0.0, 0.0], [10.0, 0.0],
                                              [0.0, 10.0]]),
                        seed=0, iterations_run=0, inertia=0.0)

    def test_zero_descriptors(self):
        counts = encode_image(self._cb(), np.zeros((0, 2)))
        assert np.array_equal(counts, [0, 0, 0])

    def test_counts_sum_to_descriptor_count(self):
        rng = np.random.default_rng(7)
        descs = rng.normal(size=(37, 2)) * 6
        counts = encode_image(self._cb(), descs)
        assert counts.sum() == 37
        assert counts.dtype == np.int64

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(8)
        descs = rng.normal(size=(50, 2)) * 6
        cb = self._cb()
        counts = encode_image(cb, descs)
        perm = [2, 0, 1]
        permuted = Codebook(centroids=cb.centroids[perm], seed=0,
                            iterations_run=0, inertia=0.0)
        assert np.array_equal(encode_image(permuted, descs), counts[perm])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            encode_image(self._cb(), np.zeros((3, 5)))


class TestFeatureCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        table = rng.integers(-50, 300, size=(20, 6))
        write_feature_csv(list(table), tmp_path / "t.csv")
        back = read_feature_csv(tmp_path / "t.csv")
        assert np.array_equal(back, table)

    def test_header_and_line_endings(self, tmp_path):
        write_feature_csv([np.asarray([7, 8, 9])], tmp_path / "t.csv")
        raw = (tmp_path / "t.csv").read_bytes()
        assert raw == b"0,1,2\n7,8,9\n"

    def test_empty_table_needs_width(self, tmp_path):
        with pytest.raises(ValueError):
            write_feature_csv([], tmp_path / "t.csv")
        write_feature_csv([], tmp_path / "t.csv", n_cols=4)
        back = read_feature_csv(tmp_path / "t.csv")
        assert back.shape == (0, 4)

    def test_ragged_row_named_by_line(self, tmp_path):
        (tmp_path / "bad.csv").write_text("0,1,2\n1,2,3\n4,5\n")
        with pytest.raises(RaggedRowsError, match="line 3"):
            read_feature_csv(tmp_path / "bad.csv")

    def test_ragged_input_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError):
            write_feature_csv([np.asarray([1, 2]), np.asarray([1])],
                              tmp_path / "t.csv")


class TestCodebookJson:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(60, 32)) * 100
        cb = kmeans_fit(x, 5, seed=3)
        save_codebook(cb, tmp_path / "cb.json")
        back = load_codebook(tmp_path / "cb.json")
        assert np.array_equal(back.centroids, cb.centroids)
        assert back.inertia == cb.inertia
        assert back.seed == cb.seed
        assert back.iterations_run == cb.iterations_run

    def test_shape_mismatch_rejected(self, tmp_path):
        (tmp_path / "bad.json").write_text(
            '{"k": 2, "dim": 3, "seed": 0, "iterations_run": 1,'
            ' "inertia": 0.0, "centroids": [[1, 2, 3]]}')
        with pytest.raises(ValueError):
            load_codebook(tmp_path / "bad.json")
