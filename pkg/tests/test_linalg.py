import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splineproj.basis import PeriodicBSplineBasis
from splineproj.errors import DimensionTooLarge, NotPositiveDefinite
from splineproj.gram import periodic_gram_matrix
from splineproj.knots import random_knots, uniform_knots
from splineproj.linalg import (
    BandedSymmetricMatrix,
    CyclicBandedMatrix,
    CyclicCholesky,
    cholesky_solve,
    factorize,
    full_inverse,
)


def random_spd_band(rng, n, b):
    """Diagonally dominant symmetric band matrix."""
    m = np.zeros((n, n))
    for d in range(1, b + 1):
        v = rng.uniform(-1, 1, n - d)
        m += np.diag(v, d) + np.diag(v, -d)
    m += np.diag(np.abs(m).sum(axis=1) + rng.uniform(0.1, 1.0, n))
    return m


def random_spd_cyclic(rng, n, b):
    m = np.zeros((n, n))
    idx = np.arange(n)
    for d in range(1, b + 1):
        v = rng.uniform(-1, 1, n)
        m[idx, (idx + d) % n] += v
        m[(idx + d) % n, idx] += v
    m += np.diag(np.abs(m).sum(axis=1) + rng.uniform(0.1, 1.0, n))
    return m


class TestStorage:
    def test_roundtrip(self, rng):
        m = random_spd_band(rng, 9, 2)
        bm = BandedSymmetricMatrix.from_dense(m, 2)
        np.testing.assert_array_equal(bm.to_dense(), m)
        x = rng.normal(size=(9, 3))
        np.testing.assert_allclose(bm.matvec(x), m @ x, atol=1e-13)

    def test_cyclic_roundtrip(self, rng):
        m = random_spd_cyclic(rng, 11, 3)
        cm = CyclicBandedMatrix.from_dense(m, 3)
        np.testing.assert_array_equal(cm.to_dense(), m)
        assert cm.shape == (11, 11) and cm.bandwidth == 3


class TestSolve:
    def test_identity(self):
        e = np.zeros(5)
        e[0] = 1
        m = BandedSymmetricMatrix(np.ones((1, 5)))
        np.testing.assert_array_equal(cholesky_solve(m, e), e)

    def test_diagonal(self, rng):
        kappa = rng.uniform(0.1, 1.0, 7)
        b = rng.normal(size=7)
        x = cholesky_solve(BandedSymmetricMatrix(kappa[None, :]), b)
        np.testing.assert_allclose(x, b / kappa, rtol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(n=st.integers(1, 1024), b=st.integers(0, 5), seed=st.integers(0, 2**32 - 1))
    def test_band_vs_dense(self, n, b, seed):
        rng = np.random.default_rng(seed)
        b = min(b, n - 1)
        m = random_spd_band(rng, n, b)
        rhs = rng.normal(size=n)
        x = cholesky_solve(BandedSymmetricMatrix.from_dense(m, b), rhs)
        want = np.linalg.solve(m, rhs)
        assert np.max(np.abs(x - want)) <= 1e-9 * np.max(np.abs(want))
        assert np.max(np.abs(m @ x - rhs)) <= 1e-10 * np.max(np.abs(rhs)) * n

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(3, 700), b=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
    def test_cyclic_vs_dense(self, n, b, seed):
        rng = np.random.default_rng(seed)
        b = min(b, (n - 1) // 2)
        m = random_spd_cyclic(rng, n, b)
        rhs = rng.normal(size=(n, 2))
        cm = CyclicBandedMatrix.from_dense(m, b)
        want = np.linalg.solve(m, rhs)
        for threshold in (0, 10**6):
            x = CyclicCholesky(cm, threshold).solve(rhs)
            assert np.max(np.abs(x - want)) <= 1e-9 * np.max(np.abs(want))

    def test_bordered_path_used(self, rng):
        m = random_spd_cyclic(rng, 400, 3)
        f = factorize(CyclicBandedMatrix.from_dense(m, 3))
        assert not f.dense

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_periodic_gram_bordered(self, k):
        pb = PeriodicBSplineBasis(random_knots(300, k, np.random.default_rng(k)))
        g = periodic_gram_matrix(pb)
        rhs = np.random.default_rng(0).normal(size=300)
        x = CyclicCholesky(g, 0).solve(rhs)
        want = np.linalg.solve(g.to_dense(), rhs)
        assert np.max(np.abs(x - want)) <= 1e-9 * np.max(np.abs(want))

    def test_not_positive_definite(self):
        m = BandedSymmetricMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]], 1)
        with pytest.raises(NotPositiveDefinite):
            factorize(m)

    def test_tiny_pivot(self):
        m = BandedSymmetricMatrix.from_dense([[1.0, 1.0], [1.0, 1.0 + 1e-15]], 1)
        with pytest.raises(NotPositiveDefinite):
            factorize(m)

    def test_cyclic_not_positive_definite(self, rng):
        m = -random_spd_cyclic(rng, 300, 2)
        with pytest.raises(NotPositiveDefinite):
            factorize(CyclicBandedMatrix.from_dense(m, 2))


class TestInverse:
    def test_diagonal(self):
        d = np.array([2.0, 4.0, 0.5])
        np.testing.assert_array_equal(full_inverse(BandedSymmetricMatrix(d[None, :])), np.diag(1 / d))

    def test_two_by_two(self):
        inv = full_inverse(BandedSymmetricMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]], 1))
        np.testing.assert_allclose(inv, np.array([[2, -1], [-1, 2]]) / 3, atol=1e-15)

    def test_symmetric(self, rng):
        for n in (5, 64, 300):
            m = random_spd_cyclic(rng, n, 2)
            inv = full_inverse(CyclicBandedMatrix.from_dense(m, 2))
            assert np.max(np.abs(inv - inv.T)) <= 1e-10 * np.max(np.abs(inv))
            np.testing.assert_allclose(inv, np.linalg.inv(m), atol=1e-12 * np.abs(inv).max())

    def test_circulant_hat_inverse(self):
        g = periodic_gram_matrix(PeriodicBSplineBasis(uniform_knots(8, 2)))
        inv = full_inverse(g)
        i = np.arange(8)
        d = np.minimum((i[:, None] - i[None, :]) % 8, (i[None, :] - i[:, None]) % 8)
        for dist in range(5):
            vals = inv[d == dist]
            assert np.ptp(vals) <= 1e-13 * np.abs(inv).max()

    def test_too_large(self):
        with pytest.raises(DimensionTooLarge):
            full_inverse(BandedSymmetricMatrix(np.ones((1, 10))), max_dim=5)
