"""Symmetric banded and cyclic banded matrices: storage, Cholesky solves, inverses.

Banded factorizations are delegated to LAPACK through
:func:`scipy.linalg.cholesky_banded`. Cyclic systems are reduced to a banded
one by bordered (Schur complement) elimination of the last ``b`` unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as sla

from .errors import DimensionTooLarge, NotPositiveDefinite

PIVOT_TOL = 1e-13
MAX_INVERSE_DIM = 4096
DENSE_CYCLIC_DIM = 256


@dataclass(frozen=True, eq=False)
class BandedSymmetricMatrix:
    """Lower band storage: ``band[d, i] = M[i + d, i]`` for ``d = 0..b``.

    Entries with ``i + d >= dim`` are padding and kept at zero. This is the
    ``lower=True`` layout of :func:`scipy.linalg.cholesky_banded`.
    """

    band: np.ndarray

    @property
    def dim(self) -> int:
        return self.band.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.band.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.dim, self.dim

    def diagonal(self) -> np.ndarray:
        return self.band[0].copy()

    @classmethod
    def from_dense(cls, m, bandwidth: int) -> "BandedSymmetricMatrix":
        m = np.asarray(m, dtype=np.float64)
        n = m.shape[0]
        band = np.zeros((bandwidth + 1, n))
        for d in range(bandwidth + 1):
            band[d, : n - d] = np.diagonal(m, -d)
        return cls(band)

    def to_dense(self) -> np.ndarray:
        n = self.dim
        m = np.zeros((n, n))
        for d in range(self.bandwidth + 1):
            idx = np.arange(n - d)
            m[idx + d, idx] = self.band[d, : n - d]
            m[idx, idx + d] = self.band[d, : n - d]
        return m

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        n = self.dim
        y = self.band[0][:, None] * x.reshape(n, -1)
        xx = x.reshape(n, -1)
        for d in range(1, self.bandwidth + 1):
            v = self.band[d, : n - d][:, None]
            y[d:] += v * xx[: n - d]
            y[: n - d] += v * xx[d:]
        return y.reshape(x.shape)


@dataclass(frozen=True, eq=False)
class CyclicBandedMatrix:
    """Symmetric matrix whose entries vanish beyond cyclic distance ``b``.

    Storage: ``band[d, i] = M[i, (i + d) % n]`` for ``d = 0..b``. When
    ``2b >= n`` some entries are stored twice; the two copies must agree.
    """

    band: np.ndarray

    @property
    def dim(self) -> int:
        return self.band.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.band.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.dim, self.dim

    def diagonal(self) -> np.ndarray:
        return self.band[0].copy()

    @classmethod
    def from_dense(cls, m, bandwidth: int) -> "CyclicBandedMatrix":
        m = np.asarray(m, dtype=np.float64)
        n = m.shape[0]
        idx = np.arange(n)
        band = np.stack([m[idx, (idx + d) % n] for d in range(bandwidth + 1)])
        return cls(band)

    def to_dense(self) -> np.ndarray:
        n = self.dim
        m = np.zeros((n, n))
        idx = np.arange(n)
        for d in range(self.bandwidth + 1):
            m[idx, (idx + d) % n] = self.band[d]
            m[(idx + d) % n, idx] = self.band[d]
        return m

    def matvec(self, x) -> np.ndarray:
        return self.to_dense() @ np.asarray(x, dtype=np.float64)

    def is_circulant(self) -> float:
        """Largest deviation of any stored diagonal from its mean."""
        return float(np.max(np.abs(self.band - self.band.mean(axis=1, keepdims=True))))


AnyBanded = Union[BandedSymmetricMatrix, CyclicBandedMatrix]


def _check_pivots(diag_l: np.ndarray, scale: float) -> None:
    pivots = diag_l**2
    bad = np.flatnonzero(~(pivots > PIVOT_TOL * scale))
    if bad.size:
        raise NotPositiveDefinite(
            f"pivot {pivots[bad[0]]:.3e} at row {bad[0]} below {PIVOT_TOL:g} * max diagonal ({scale:.3e})"
        )


def _dense_cholesky(m: np.ndarray, scale: float) -> np.ndarray:
    try:
        low = sla.cholesky(m, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    _check_pivots(np.diag(low), scale)
    return low


class DiagonalSolver:
    """Bandwidth-0 case: solves are plain divisions, exact to rounding of one operation."""

    def __init__(self, m: AnyBanded):
        d = m.band[0].copy()
        scale = float(np.max(np.abs(d))) if d.size else 0.0
        bad = np.flatnonzero(~(d > PIVOT_TOL * scale))
        if bad.size:
            raise NotPositiveDefinite(f"diagonal entry {d[bad[0]]:.3e} at row {bad[0]} is not positive")
        self.dim = m.dim
        self.d = d

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        return rhs / self.d.reshape((-1,) + (1,) * (rhs.ndim - 1))


class BandedCholesky:
    """Cholesky factor of a :class:`BandedSymmetricMatrix`."""

    def __init__(self, m: BandedSymmetricMatrix):
        self.dim = m.dim
        scale = float(np.max(np.abs(m.band[0]))) if m.dim else 0.0
        try:
            self.cb = sla.cholesky_banded(m.band, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from None
        _check_pivots(self.cb[0], scale)

    def solve(self, rhs) -> np.ndarray:
        return sla.cho_solve_banded((self.cb, True), np.asarray(rhs, dtype=np.float64))


class CyclicCholesky:
    """Factorization of a :class:`CyclicBandedMatrix`.

    Small systems (``dim <= dense_threshold``) use a dense Cholesky factor.
    Larger ones split off the last ``b`` unknowns: the leading block ``A`` is
    banded, and the ``b x b`` Schur complement ``D - C^T A^{-1} C`` closes
    the system.
    """

    def __init__(self, m: CyclicBandedMatrix, dense_threshold: int = DENSE_CYCLIC_DIM):
        n, b = m.dim, m.bandwidth
        self.dim = n
        scale = float(np.max(np.abs(m.band[0])))
        self.dense = n <= dense_threshold or n < 3 * b + 2 or b == 0
        if self.dense:
            self.low = _dense_cholesky(m.to_dense(), scale)
            return
        nb = n - b
        band = np.zeros((b + 1, nb))
        for d in range(b + 1):
            band[d, : nb - d] = m.band[d, : nb - d]
        self.inner = BandedCholesky(BandedSymmetricMatrix(band))
        # border blocks C = M[:nb, nb:], D = M[nb:, nb:]
        c = np.zeros((nb, b))
        dblk = np.zeros((b, b))
        idx = np.arange(n)
        for d in range(b + 1):
            rows, cols, vals = idx, (idx + d) % n, m.band[d]
            for r, q, v in ((rows, cols, vals), (cols, rows, vals)):
                sel = (q >= nb) & (r < nb)
                c[r[sel], q[sel] - nb] = v[sel]
                sel = (q >= nb) & (r >= nb)
                dblk[r[sel] - nb, q[sel] - nb] = v[sel]
        self.nb = nb
        self.c = c
        self.z = self.inner.solve(c)
        schur = dblk - c.T @ self.z
        self.schur_low = _dense_cholesky(0.5 * (schur + schur.T), scale)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.dense:
            return sla.cho_solve((self.low, True), rhs)
        nb = self.nb
        r1, r2 = rhs[:nb], rhs[nb:]
        y = self.inner.solve(r1)
        x2 = sla.cho_solve((self.schur_low, True), r2 - self.c.T @ y)
        x1 = y - self.z @ x2
        return np.concatenate([x1, x2], axis=0)


def factorize(m: AnyBanded, dense_threshold: int = DENSE_CYCLIC_DIM):
    """Cholesky-type factorization object with a ``solve(rhs)`` method."""
    if isinstance(m, (BandedSymmetricMatrix, CyclicBandedMatrix)) and m.bandwidth == 0:
        return DiagonalSolver(m)
    if isinstance(m, BandedSymmetricMatrix):
        return BandedCholesky(m)
    if isinstance(m, CyclicBandedMatrix):
        return CyclicCholesky(m, dense_threshold)
    raise TypeError(f"unsupported matrix type {type(m).__name__}")


def cholesky_solve(m: AnyBanded, rhs, dense_threshold: int = DENSE_CYCLIC_DIM) -> np.ndarray:
    """Solve ``M x = rhs`` for a symmetric positive definite (cyclic) band matrix."""
    return factorize(m, dense_threshold).solve(rhs)


def full_inverse(m: AnyBanded, factor=None, max_dim: int = MAX_INVERSE_DIM) -> np.ndarray:
    """Dense inverse, computed column by column from a single factorization."""
    if m.dim > max_dim:
        raise DimensionTooLarge(f"dense inverse of a {m.dim}x{m.dim} matrix exceeds the limit {max_dim}")
    if factor is None:
        factor = factorize(m)
    return factor.solve(np.eye(m.dim))
