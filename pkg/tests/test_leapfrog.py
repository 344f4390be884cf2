"""Leapfrog distance tests: hand examples, brute-force oracles, metric axioms."""

import itertools

import numpy as np
import pytest

from leapson import leapfrog
from leapson.errors import InputError


def brute_force_lf(points):
    """Oracle: minimum over all simple vertex paths, by exhaustive enumeration.

    Only usable for tiny n; completely independent of the Dijkstra code.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    cost = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            others = [k for k in range(n) if k not in (i, j)]
            best = cost[i, j]
            for r in range(1, len(others) + 1):
                for mid in itertools.permutations(others, r):
                    path = (i, *mid, j)
                    total = sum(cost[a, b] for a, b in zip(path, path[1:]))
                    best = min(best, total)
            out[i, j] = out[j, i] = best
    return out


class TestExamples:
    def test_two_points_single_edge(self):
        D = leapfrog.lf_all_pairs([0.0, 1.0])
        assert D[0, 1] == pytest.approx(1.0)

    def test_collinear_midpoint_beats_direct(self):
        D = leapfrog.lf_all_pairs([0.0, 1.0, 2.0])
        # path through the midpoint costs 1 + 1, the direct hop costs 4
        assert D[0, 2] == pytest.approx(2.0)
        assert np.allclose(D, brute_force_lf([0.0, 1.0, 2.0]))

    def test_sorted_1d_sum_of_squared_gaps(self):
        D = leapfrog.lf_all_pairs([0.0, 0.1, 0.5, 1.0])
        assert D[0, 3] == pytest.approx(0.01 + 0.16 + 0.25)

    def test_from_source_examples(self):
        vec = leapfrog.lf_from_source([0.0, 1.0, 2.0], 0)
        assert vec == pytest.approx([0.0, 1.0, 2.0])
        pts = [(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]
        vec = leapfrog.lf_from_source(pts, 0)
        # direct hop to the corner costs 25; via the midpoint 9 + 16 = 25
        assert vec == pytest.approx([0.0, 9.0, 25.0])
        assert vec[0] == 0.0

    def test_source_is_zero(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(11, 3))
        for src in (0, 5, 10):
            assert leapfrog.lf_from_source(pts, src)[src] == 0.0

    def test_source_out_of_range(self):
        with pytest.raises(IndexError):
            leapfrog.lf_from_source([0.0, 1.0], 2)

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            leapfrog.lf_all_pairs([[0.0], [np.nan]])
        with pytest.raises(InputError):
            leapfrog.lf_all_pairs([[0.0], [np.inf]])


class TestBruteForceOracle:
    @pytest.mark.parametrize("seed", range(6))
    def test_random_small_instances(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.integers(2, 7)
        d = rng.integers(1, 4)
        pts = rng.normal(size=(n, d))
        D = leapfrog.lf_all_pairs(pts)
        assert np.allclose(D, brute_force_lf(pts), atol=1e-12)

    def test_matches_from_source_rows(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(20, 2))
        D = leapfrog.lf_all_pairs(pts)
        for src in range(0, 20, 5):
            row = leapfrog.lf_from_source(pts, src)
            assert np.allclose(row, D[src], atol=1e-12)


class TestClosedForm1D:
    def test_two_points(self):
        D = leapfrog.lf_1d_closed_form([0.0, 1.0])
        assert D[0, 1] == pytest.approx(1.0)

    def test_hand_sums(self):
        D = leapfrog.lf_1d_closed_form([0.0, 0.1, 0.5, 1.0])
        assert D[0, 2] == pytest.approx(0.17)
        assert D[0, 3] == pytest.approx(0.42)

    def test_unsorted_rejected(self):
        with pytest.raises(InputError):
            leapfrog.lf_1d_closed_form([0.0, 2.0, 1.0])
        with pytest.raises(InputError):
            leapfrog.lf_1d_closed_form([0.0, 0.0, 1.0])  # ties are not strictly sorted

    @pytest.mark.parametrize("n", [2, 17, 200])
    def test_oracle_equivalence_with_dijkstra(self, n):
        rng = np.random.default_rng(n)
        x = np.sort(rng.random(n) * 3.0)
        x += np.arange(n) * 1e-9  # enforce strictness under duplicates
        closed = leapfrog.lf_1d_closed_form(x)
        full = leapfrog.lf_all_pairs(x)
        assert np.abs(closed - full).max() < 1e-12


class TestMetricAxioms:
    @pytest.mark.parametrize("seed", range(4))
    def test_symmetry_diagonal_triangle(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(5, 51))
        pts = rng.normal(size=(n, 2))
        D = leapfrog.lf_all_pairs(pts)
        assert np.array_equal(D, D.T)          # symmetry is exact
        assert np.all(np.diag(D) == 0.0)
        assert np.all(D >= 0.0)
        # triangle inequality within 1e-9 relative, all triples
        lhs = D[:, None, :]                     # D[i, k]
        rhs = D[:, :, None] + D[None, :, :]     # D[i, j] + D[j, k]
        slack = 1e-9 * np.maximum(1.0, np.abs(rhs))
        assert np.all(lhs <= rhs + slack)

    def test_dominated_by_direct_edge(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(40, 3))
        D = leapfrog.lf_all_pairs(pts)
        direct = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        assert np.all(D <= direct + 1e-12)

    def test_duplicate_points_distance_zero(self):
        pts = np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]])
        D = leapfrog.lf_all_pairs(pts)
        assert D[0, 1] == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_point_insertion_never_increases(self, seed):
        rng = np.random.default_rng(200 + seed)
        pts = rng.normal(size=(25, 2))
        D_small = leapfrog.lf_all_pairs(pts[:-1])
        D_big = leapfrog.lf_all_pairs(pts)
        assert np.all(D_big[:-1, :-1] <= D_small + 1e-12)

    def test_scaling_covariance(self):
        rng = np.random.default_rng(42)
        pts = rng.normal(size=(30, 2))
        D = leapfrog.lf_all_pairs(pts)
        for s in (0.25, 3.0):
            Ds = leapfrog.lf_all_pairs(s * pts)
            denom = np.maximum(np.abs(D) * s * s, 1e-300)
            off = ~np.eye(30, dtype=bool)
            assert np.max(np.abs(Ds - s * s * D)[off] / denom[off]) < 1e-12


class TestStatisticalDecay:
    def test_max_lf_decreases_as_n_doubles(self):
        # uniform unit square; the largest pairwise distance shrinks with n
        sizes = [250, 500, 1000, 2000]
        averages = []
        for n in sizes:
            vals = []
            for seed in range(20):
                rng = np.random.default_rng(10_000 + seed)
                pts = rng.random((n, 2))
                vals.append(leapfrog.lf_all_pairs(pts).max())
            averages.append(np.mean(vals))
        assert all(a > b for a, b in zip(averages, averages[1:])), averages


class TestBackends:
    def test_numpy_fallback_matches(self):
        rng = np.random.default_rng(17)
        pts = rng.normal(size=(30, 2))
        D = leapfrog.lf_all_pairs(pts)
        expected = np.empty_like(D)
        for s in range(30):
            expected[s] = leapfrog._lf_source_numpy(pts, s)
        expected = np.minimum(expected, expected.T)
        np.fill_diagonal(expected, 0.0)
        assert np.allclose(D, expected, rtol=0.0, atol=1e-13)


class TestSerialisation:
    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        D = leapfrog.lf_all_pairs(rng.normal(size=(9, 2)))
        path = tmp_path / "d.csv"
        leapfrog.write_distance_csv(D, path)
        assert np.array_equal(leapfrog.read_distance_csv(path), D)

    def test_binary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        D = leapfrog.lf_all_pairs(rng.normal(size=(7, 3)))
        path = tmp_path / "d.bin"
        leapfrog.write_distance_binary(D, path)
        assert np.array_equal(leapfrog.read_distance_binary(path), D)

    def test_binary_magic_checked(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\0" * 16)
        with pytest.raises(InputError):
            leapfrog.read_distance_binary(path)

    def test_csv_rejects_asymmetry(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1\n2,0\n")
        with pytest.raises(InputError):
            leapfrog.read_distance_csv(path)
