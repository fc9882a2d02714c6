from functools import lru_cache

import numpy as np
import pytest

from intentplan.dtw import DtwKernelParams, dtw_distance, dtw_kernel, dtw_distance_matrix


def brute_force_dtw(x, y):
    """Exhaustive minimal monotone alignment cost; oracle for short sequences."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)

    @lru_cache(maxsize=None)
    def rec(i, j):
        c = float(((x[i] - y[j]) ** 2).sum())
        if i == 0 and j == 0:
            return c
        options = []
        if i > 0 and j > 0:
            options.append(rec(i - 1, j - 1))
        if i > 0:
            options.append(rec(i - 1, j))
        if j > 0:
            options.append(rec(i, j - 1))
        return c + min(options)

    return rec(x.shape[0] - 1, y.shape[0] - 1)


class TestDtwDistance:
    def test_identity(self):
        x = np.random.default_rng(0).normal(size=(6, 4))
        assert dtw_distance(x, x) == 0.0

    def test_single_cell(self):
        assert dtw_distance(np.array([[0.0]]), np.array([[3.0]])) == 9.0

    def test_two_frame_example(self):
        assert dtw_distance(np.array([[0.0], [0.0]]), np.array([[0.0], [1.0]])) == 1.0

    def test_oracle_100_random_pairs(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n, m = rng.integers(1, 6), rng.integers(1, 6)
            d = rng.integers(1, 4)
            x = rng.normal(size=(n, d))
            y = rng.normal(size=(m, d))
            np.testing.assert_allclose(dtw_distance(x, y), brute_force_dtw(x, y),
                                       rtol=1e-12, atol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.normal(size=(rng.integers(2, 8), 3))
            y = rng.normal(size=(rng.integers(2, 8), 3))
            assert abs(dtw_distance(x, y) - dtw_distance(y, x)) < 1e-10

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dtw_distance(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dtw_distance(np.zeros((0, 2)), np.zeros((3, 2)))

    def test_band_matches_unbanded_when_wide(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(7, 3))
        y = rng.normal(size=(5, 3))
        assert abs(dtw_distance(x, y, band=50) - dtw_distance(x, y)) < 1e-12

    def test_band_is_restriction(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(7, 3))
        y = rng.normal(size=(7, 3))
        assert dtw_distance(x, y, band=0) >= dtw_distance(x, y) - 1e-12


class TestDtwKernel:
    def test_unit_at_zero_distance(self):
        x = np.random.default_rng(0).normal(size=(4, 3))
        assert dtw_kernel(x, x, DtwKernelParams(length_scale=2.0)) == 1.0

    def test_e_minus_one_at_gamma(self):
        x = np.array([[0.0]])
        y = np.array([[2.0]])  # distance 4
        val = dtw_kernel(x, y, DtwKernelParams(length_scale=4.0))
        np.testing.assert_allclose(val, np.exp(-1.0), rtol=1e-12)

    def test_symmetry_sweep(self):
        rng = np.random.default_rng(9)
        params = DtwKernelParams(length_scale=3.0)
        for _ in range(100):
            x = rng.normal(size=(rng.integers(2, 6), 2))
            y = rng.normal(size=(rng.integers(2, 6), 2))
            assert abs(dtw_kernel(x, y, params) - dtw_kernel(y, x, params)) < 1e-12

    def test_range(self):
        rng = np.random.default_rng(10)
        params = DtwKernelParams(length_scale=1.0)
        for _ in range(50):
            x = rng.normal(size=(3, 2))
            y = rng.normal(size=(4, 2))
            v = dtw_kernel(x, y, params)
            assert 0.0 < v <= 1.0

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            DtwKernelParams(length_scale=0.0)
        with pytest.raises(ValueError):
            DtwKernelParams(length_scale=1.0, band=-1)


class TestDistanceMatrix:
    def test_symmetric_case(self):
        rng = np.random.default_rng(5)
        seqs = rng.normal(size=(6, 5, 3))
        d = dtw_distance_matrix(seqs)
        assert np.allclose(d, d.T)
        assert np.all(np.diag(d) == 0)

    def test_cross_matches_scalar(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(3, 4, 2))
        b = rng.normal(size=(2, 4, 2))
        d = dtw_distance_matrix(a, b)
        for i in range(3):
            for j in range(2):
                np.testing.assert_allclose(d[i, j], dtw_distance(a[i], b[j]))
