import numpy as np
import pytest
import scipy.linalg

from hpmf.errors import ZeroMatrix
from hpmf.imaging import load_image, uniform_mask
from hpmf.priors import PriorOperators, build_dct_matrix, build_tv_matrix, estimate_rank
from hpmf.tensor_core import unfold_mode


class TestTv:
    def test_size_three(self):
        np.testing.assert_array_equal(build_tv_matrix(3), [[1, -1, 0], [0, 1, -1]])

    def test_size_one(self):
        assert build_tv_matrix(1).shape == (0, 1)

    def test_constant_annihilated(self):
        assert not (build_tv_matrix(4) @ np.full(4, 2.5)).any()

    @pytest.mark.parametrize("size", [2, 5, 17])
    def test_rows_and_differences(self, rng, size):
        L = build_tv_matrix(size)
        for row in L:
            nz = np.flatnonzero(row)
            assert list(row[nz]) == [1.0, -1.0] and nz[1] == nz[0] + 1
        x = rng.standard_normal(size)
        np.testing.assert_array_equal(L @ x, x[:-1] - x[1:])


class TestDct:
    def test_size_one(self):
        np.testing.assert_array_equal(build_dct_matrix(1), [[1.0]])

    def test_size_two(self):
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(build_dct_matrix(2), [[r, r], [r, -r]], atol=1e-15)

    def test_constant_vector_energy(self):
        B = build_dct_matrix(8)
        coef = B @ np.ones(8)
        assert coef[0] == pytest.approx(np.sqrt(8))
        np.testing.assert_allclose(coef[1:], 0, atol=1e-12)

    def test_entry_formula(self):
        n = 6
        B = build_dct_matrix(n)
        for k in range(1, n + 1):
            c = np.sqrt(1 / n) if k == 1 else np.sqrt(2 / n)
            for j in range(1, n + 1):
                assert B[k - 1, j - 1] == pytest.approx(
                    c * np.cos(np.pi * (2 * j - 1) * (k - 1) / (2 * n)), abs=1e-15)

    def test_orthonormal_all_sizes(self):
        for n in range(1, 65):
            B = build_dct_matrix(n)
            np.testing.assert_allclose(B.T @ B, np.eye(n), atol=1e-12)

    def test_matches_scipy_dct(self):
        from scipy.fft import dct

        np.testing.assert_allclose(build_dct_matrix(9), dct(np.eye(9), norm="ortho", axis=0),
                                   atol=1e-14)

    def test_operators_shapes(self):
        ops = PriorOperators.for_mode(7, 3)
        assert ops.tv_u.shape == (6, 7) and ops.tv_v.shape == (2, 3)
        assert ops.dct_u.shape == (7, 7) and ops.dct_v.shape == (3, 3)


class TestRank:
    def test_ratio_count(self):
        m = np.diag([10.0, 6.0, 4.0, 1.0])
        assert estimate_rank(m, 0.5) == 2

    def test_rank_one(self, rng):
        m = np.outer(rng.standard_normal(5), rng.standard_normal(7))
        assert estimate_rank(m, 0.37) == 1

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrix):
            estimate_rank(np.zeros((3, 3)), 0.1)

    def test_photo_against_independent_svd(self, photo_path):
        img = load_image(photo_path)
        x0 = np.where(uniform_mask(img.shape, 0.2, 0), img, 0.0)
        for n in (1, 2, 3):
            xn = unfold_mode(x0, n)
            s = scipy.linalg.svd(xn, compute_uv=False, lapack_driver="gesvd")
            expected = min(max(int(np.sum(s / s[0] > 0.05)), 1), min(xn.shape))
            assert estimate_rank(xn, 0.05) == expected

    def test_monotone_in_delta(self, rng):
        m = rng.standard_normal((12, 9)) @ np.diag(np.geomspace(1, 1e-3, 9)) @ rng.standard_normal((9, 9))
        ranks = [estimate_rank(m, d) for d in np.linspace(0.01, 0.99, 40)]
        assert all(a >= b for a, b in zip(ranks, ranks[1:]))
