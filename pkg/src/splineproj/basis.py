"""B-spline bases on an interval and on the torus.

Both basis classes expose the same local-evaluation surface used by the
assembly and projection code:

``local(x)``
    returns ``(active, values)`` with shape ``(len(x), k)``; ``active`` holds
    coefficient positions ``0..count-1`` and ``values`` the corresponding
    basis function values.
``cell_table()``
    the non-empty knot cells with their active positions, so integrals can
    be assembled cell by cell.

Public functions take knot-based indices (``N_first .. N_last``); matrices
and coefficient vectors are indexed by position ``i - first``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Union

import numpy as np

from .errors import DomainViolation, EmptySet, IndexOutOfRange
from .knots import KnotVector, PeriodicKnotVector, periodic_lift, lift_window


def local_bspline_values(t: np.ndarray, mu: np.ndarray, x: np.ndarray, k: int, offset=None) -> np.ndarray:
    """Values of the ``k`` B-splines of order ``k`` that live on cell ``mu``.

    ``t[mu] <= x <= t[mu + 1]`` is assumed; column ``p`` of the result holds
    the B-spline whose support starts at ``t[mu - k + 1 + p]``. Uses the
    triangular recurrence of de Boor, which only forms convex combinations
    and therefore keeps the values non-negative.

    If ``offset = x - t[mu]`` is supplied the recurrence runs in cell-local
    coordinates, so the values depend on knot differences only and are
    free of the rounding of ``x`` far from the origin.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu)
    vals = np.zeros(x.shape + (k,))
    vals[..., 0] = 1.0
    if k == 1:
        return vals
    if offset is not None:
        x = np.asarray(offset, dtype=np.float64)
        origin = t[mu]
    left = np.empty(x.shape + (k,))
    right = np.empty(x.shape + (k,))
    for j in range(1, k):
        if offset is None:
            left[..., j] = x - t[mu + 1 - j]
            right[..., j] = t[mu + j] - x
        else:
            left[..., j] = x + (origin - t[mu + 1 - j])
            right[..., j] = (t[mu + j] - origin) - x
        saved = np.zeros(x.shape)
        for r in range(j):
            temp = vals[..., r] / (right[..., r + 1] + left[..., j - r])
            vals[..., r] = saved + right[..., r + 1] * temp
            saved = left[..., j - r] * temp
        vals[..., j] = saved
    return vals


@dataclass(frozen=True)
class CellTable:
    """Non-empty cells of a basis.

    ``mu`` indexes the evaluation knot array, ``active[c]`` lists the
    coefficient positions of the ``k`` basis functions alive on cell ``c``.
    """

    left: np.ndarray
    width: np.ndarray
    mu: np.ndarray
    active: np.ndarray
    knots: np.ndarray
    order: int

    def __len__(self) -> int:
        return len(self.left)

    def points(self, u: np.ndarray, cells=None) -> np.ndarray:
        """Points ``left + u * width`` for local coordinates ``u`` (broadcast over cells)."""
        left = self.left if cells is None else self.left[cells]
        width = self.width if cells is None else self.width[cells]
        return left[:, None] + np.asarray(u)[None, :] * width[:, None]

    def values(self, u: np.ndarray, cells=None) -> np.ndarray:
        """Active basis values at local coordinates ``u``: shape ``(cells, len(u), k)``."""
        mu = self.mu if cells is None else self.mu[cells]
        width = self.width if cells is None else self.width[cells]
        x = self.points(u, cells)
        offset = np.asarray(u)[None, :] * width[:, None]
        return local_bspline_values(self.knots, np.broadcast_to(mu[:, None], x.shape), x, self.order, offset)


class BSplineBasis:
    """The B-splines ``N_i``, ``i = first..last``, of a :class:`KnotVector`."""

    periodic = False

    def __init__(self, kv: KnotVector):
        self.kv = kv
        self.order = kv.order
        self.knots = kv.knots
        self.first = kv.first
        self.count = kv.count
        self.lo = kv.lo
        self.hi = kv.hi

    def __repr__(self) -> str:
        return f"BSplineBasis(order={self.order}, count={self.count}, domain=[{self.lo}, {self.hi}])"

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first, self.first + self.count)

    def position(self, i: int) -> int:
        p = i - self.first
        if not 0 <= p < self.count:
            raise IndexOutOfRange(f"basis index {i} outside [{self.first}, {self.first + self.count - 1}]")
        return p

    @cached_property
    def support_lengths(self) -> np.ndarray:
        """``kappa_i = t_{i+k} - t_i`` by position."""
        k = self.order
        return self.knots[k:] - self.knots[:-k]

    def support(self, i: int) -> tuple[float, float]:
        p = self.position(i)
        return float(self.knots[p]), float(self.knots[p + self.order])

    def hull_length(self, i: int, j: int) -> float:
        """Length of the convex hull of ``supp N_i`` and ``supp N_j``."""
        p, q = self.position(i), self.position(j)
        k, t = self.order, self.knots
        return float(max(t[p + k], t[q + k]) - min(t[p], t[q]))

    def hull_matrix(self) -> np.ndarray:
        k, t = self.order, self.knots
        start, end = t[: self.count], t[k:]
        return np.maximum.outer(end, end) - np.minimum.outer(start, start)

    @cached_property
    def _last_cell(self) -> int:
        # last knot position mu with t[mu] < t[mu+1] <= hi
        return int(np.searchsorted(self.knots, self.hi, side="left")) - 1

    def locate(self, x) -> np.ndarray:
        """Cell position ``mu`` with ``t[mu] <= x < t[mu+1]``; ``x == hi`` uses the last cell."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(~((x >= self.lo) & (x <= self.hi))):
            bad = x[~((x >= self.lo) & (x <= self.hi))].ravel()[0]
            raise DomainViolation(f"x={bad!r} outside [{self.lo}, {self.hi}]")
        mu = np.searchsorted(self.knots, x, side="right") - 1
        return np.minimum(mu, self._last_cell)

    def local(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        mu = self.locate(x)
        vals = local_bspline_values(self.knots, mu, x, self.order)
        active = (mu - self.order + 1)[..., None] + np.arange(self.order)
        return active, vals

    def cell_table(self) -> CellTable:
        k, t = self.order, self.knots
        mu = np.arange(k - 1, len(t) - k)
        mu = mu[t[mu + 1] > t[mu]]
        active = (mu - k + 1)[:, None] + np.arange(k)
        return CellTable(t[mu], t[mu + 1] - t[mu], mu, active, t, k)

    def design_matrix(self, x) -> np.ndarray:
        """Dense collocation matrix ``B[s, p] = N_{first+p}(x_s)``."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        active, vals = self.local(x)
        out = np.zeros((len(x), self.count))
        np.add.at(out, (np.arange(len(x))[:, None], active), vals)
        return out

    def combine(self, coeffs, x) -> np.ndarray:
        """Evaluate ``sum_p coeffs[p] N_{first+p}(x)``."""
        active, vals = self.local(x)
        return np.einsum("...k,...k->...", np.asarray(coeffs)[active], vals)


class PeriodicBSplineBasis:
    """Periodic B-splines on the torus built by wrapping an unclamped lift.

    The lifted B-splines ``N_j`` on ``t_j = s_j``, ``j = -k+1..n+k-1``, are
    evaluated at the representative of ``x`` in ``[s_0, s_0 + 1)`` and
    ``N_j`` is added to ``Ñ_{j mod n}``. When ``s_0 = 0`` this is the usual
    two-case definition (``Ñ_j = N_{j-n}`` on ``[0, s_j]``, ``N_j`` elsewhere);
    it stays valid when 0 is not a knot.
    """

    periodic = True

    def __init__(self, pk: PeriodicKnotVector):
        self.pk = pk
        self.order = pk.order
        self.count = pk.n
        self.first = 0
        self.lifted = BSplineBasis(periodic_lift(pk))
        self.knots = self.lifted.knots
        self.lo = 0.0
        self.hi = 1.0

    def __repr__(self) -> str:
        return f"PeriodicBSplineBasis(order={self.order}, n={self.count})"

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.count)

    def position(self, j: int) -> int:
        if not 0 <= j < self.count:
            raise IndexOutOfRange(f"periodic index {j} outside [0, {self.count - 1}]")
        return j

    @cached_property
    def support_lengths(self) -> np.ndarray:
        return self.pk.support_lengths()

    def representative(self, x) -> np.ndarray:
        """Representative of ``x`` (mod 1) in ``[s_0, s_0 + 1)``."""
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        s0 = self.pk.s[0]
        y = np.where(x < s0, x + 1.0, x)
        return np.where(y >= s0 + 1.0, s0, y)

    def to_torus(self, y) -> np.ndarray:
        """Canonical point in ``[0, 1)`` of a real ``y``."""
        x = np.mod(np.asarray(y, dtype=np.float64), 1.0)
        return np.where(x >= 1.0, 0.0, x)

    def local(self, x) -> tuple[np.ndarray, np.ndarray]:
        y = self.representative(x)
        active, vals = self.lifted.local(y)
        return np.mod(active - (self.order - 1), self.count), vals

    def cell_table(self) -> CellTable:
        k, t, n = self.order, self.knots, self.count
        mu = np.arange(k - 1, k - 1 + n)
        mu = mu[t[mu + 1] > t[mu]]
        active = np.mod((mu - k + 1)[:, None] + np.arange(k) - (k - 1), n)
        return CellTable(t[mu], t[mu + 1] - t[mu], mu, active, t, k)

    def design_matrix(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        active, vals = self.local(x)
        out = np.zeros((len(x), self.count))
        np.add.at(out, (np.arange(len(x))[:, None], active), vals)
        return out

    def combine(self, coeffs, x) -> np.ndarray:
        active, vals = self.local(x)
        return np.einsum("...k,...k->...", np.asarray(coeffs)[active], vals)

    def cyclic_hull_matrix(self) -> np.ndarray:
        """Length of the shortest arc covering ``supp Ñ_i`` and ``supp Ñ_j`` (at most 1)."""
        start = self.pk.s
        end = start + self.support_lengths
        best = np.full((self.count, self.count), np.inf)
        for shift in (-1.0, 0.0, 1.0):
            h = np.maximum.outer(end, end + shift) - np.minimum.outer(start, start + shift)
            best = np.minimum(best, h)
        return np.minimum(best, 1.0)


AnyBasis = Union[BSplineBasis, PeriodicBSplineBasis]


def eval_bspline(basis: BSplineBasis, i: int, x):
    """Value of ``N_i`` at ``x`` (right-continuous, left limit at the right end)."""
    p = basis.position(i)
    active, vals = basis.local(x)
    out = np.where(active == p, vals, 0.0).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def eval_periodic_bspline(pbasis: PeriodicBSplineBasis, j: int, x):
    """Value of the periodic B-spline ``Ñ_j`` at ``x`` on the torus."""
    pbasis.position(j)
    active, vals = pbasis.local(x)
    out = np.where(active == j, vals, 0.0).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def window_basis(pk: PeriodicKnotVector, i: int) -> BSplineBasis:
    return BSplineBasis(lift_window(pk, i))


def index_set(basis: AnyBasis, a: float, b: float | None = None) -> set[int]:
    """Indices whose closed support meets the point ``a`` or the interval ``[a, b]``.

    For a periodic basis ``[a, b]`` is the arc from ``a`` to ``b`` (with
    ``b - a <= 1``) and supports are arcs of the torus.
    """
    if b is None:
        b = a
    if b < a:
        raise ValueError(f"empty interval [{a}, {b}]")
    k = basis.order
    if basis.periodic:
        start = basis.pk.s
        length = basis.support_lengths
        if b - a >= 1.0:
            return set(range(basis.count))
        hit = (np.mod(a - start, 1.0) <= length) | (np.mod(start - a, 1.0) <= b - a)
        return {int(j) for j in np.flatnonzero(hit)}
    if a < basis.lo or b > basis.hi:
        raise DomainViolation(f"[{a}, {b}] not inside [{basis.lo}, {basis.hi}]")
    t = basis.knots
    start, end = t[: basis.count], t[k:]
    hit = (start <= b) & (end >= a)
    return {int(p) + basis.first for p in np.flatnonzero(hit)}


def index_distance(u: Iterable[int], v: Iterable[int], n: int | None = None) -> int:
    """Distance between index sets: ``|i - j|`` or, given ``n``, the metric of Z/nZ."""
    u = np.fromiter(u, dtype=np.int64)
    v = np.fromiter(v, dtype=np.int64)
    if u.size == 0 or v.size == 0:
        raise EmptySet("index_distance needs two non-empty sets")
    diff = np.abs(u[:, None] - v[None, :])
    if n is not None:
        diff = np.mod(diff, n)
        diff = np.minimum(diff, n - diff)
    return int(diff.min())
