"""Orthogonal spline projectors, the dual basis, the projection kernel and
Lebesgue constants.

The projection of ``f`` is stored in the primal B-spline expansion: its
coefficients solve ``G c = b`` with ``G`` the Gram matrix and
``b_i = <f, N_i>``. The kernel is ``K(x, y) = sum_ij a_ij N_i(x) N_j(y)`` where
``(a_ij) = G^{-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .basis import AnyBasis, BSplineBasis, index_distance, index_set
from .errors import WindowTooSmall
from .gram import assemble_gram, moment_vector
from .knots import clamp_segment
from .linalg import factorize, full_inverse


@dataclass(eq=False)
class Spline:
    """``sum_p coeffs[p] * B_p`` for the basis functions ``B_p`` of ``basis``."""

    basis: AnyBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.basis.count,):
            raise ValueError(f"expected {self.basis.count} coefficients, got shape {self.coeffs.shape}")

    def __call__(self, x) -> np.ndarray:
        return self.basis.combine(self.coeffs, x)

    def __sub__(self, other: "Spline") -> "Spline":
        if other.basis is not self.basis:
            raise ValueError("splines live on different bases")
        return Spline(self.basis, self.coeffs - other.coeffs)


class DualBasis:
    """Gram matrix, its factorization and (lazily) its dense inverse ``(a_ij)``.

    The dual function ``N_j^*`` is ``sum_m a_jm N_m``.
    """

    def __init__(self, basis: AnyBasis, gram=None):
        self.basis = basis
        self.gram = assemble_gram(basis) if gram is None else gram
        self.factor = factorize(self.gram)

    @cached_property
    def inverse(self) -> np.ndarray:
        return full_inverse(self.gram, self.factor)

    def solve(self, rhs) -> np.ndarray:
        return self.factor.solve(rhs)


def dual_basis(basis: AnyBasis) -> DualBasis:
    return DualBasis(basis)


def project(
    basis: AnyBasis,
    f: Callable,
    *,
    db: DualBasis | None = None,
    cells_per_interval: int = 4,
    order: int | None = None,
    singularities: Sequence[float] = (),
) -> Spline:
    """Orthogonal projection of ``f`` onto the span of ``basis``."""
    db = db or DualBasis(basis)
    b = moment_vector(basis, f, cells_per_interval, order=order, singularities=singularities).values
    return Spline(basis, db.solve(b))


def dual_function_eval(db: DualBasis, j: int, x) -> np.ndarray:
    """``N_j^*(x) = sum_m a_jm N_m(x)`` over the locally active ``m``."""
    p = db.basis.position(j)
    active, vals = db.basis.local(x)
    out = np.einsum("...k,...k->...", db.inverse[p][active], vals)
    return float(out) if np.ndim(out) == 0 else out


def kernel_eval(db: DualBasis, x, y) -> np.ndarray:
    """Projection kernel ``K(x, y)``; ``x`` and ``y`` broadcast against each other."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    ax, vx = db.basis.local(x)
    ay, vy = db.basis.local(y)
    a = db.inverse[ax[..., :, None], ay[..., None, :]]
    out = np.einsum("...p,...pq,...q->...", vx, a, vy)
    return float(out) if np.ndim(out) == 0 else out


# --- Lebesgue constant -------------------------------------------------------


def _horner(coef: np.ndarray, u) -> np.ndarray:
    """Evaluate power-basis polynomials ``coef[..., m] u^m``; ``u`` broadcasts."""
    out = np.zeros(np.broadcast_shapes(coef.shape[:-1], np.shape(u)))
    for m in range(coef.shape[-1] - 1, -1, -1):
        out = out * u + coef[..., m]
    return out


def abs_integral_01(coef: np.ndarray, bisections: int = 40) -> np.ndarray:
    """``int_0^1 |p(u)| du`` for polynomials in power form, shape ``(..., deg+1)``.

    The unit interval is cut into ``4 * (deg + 1)`` pieces; where ``p``
    changes sign on a piece the root is located by bisection and the exact
    antiderivative is differenced on either side of it.
    """
    deg1 = coef.shape[-1]
    anti = np.concatenate([np.zeros(coef.shape[:-1] + (1,)), coef / np.arange(1, deg1 + 1)], axis=-1)
    pieces = 4 * deg1
    us = np.linspace(0.0, 1.0, pieces + 1)
    pv = _horner(coef[..., None, :], us)
    pa = _horner(anti[..., None, :], us)
    seg = np.abs(np.diff(pa, axis=-1))
    change = pv[..., :-1] * pv[..., 1:] < 0.0
    if np.any(change):
        idx = np.nonzero(change)
        c = coef[idx[:-1]]
        an = anti[idx[:-1]]
        j = idx[-1]
        lo, hi = us[j], us[j + 1]
        sign_lo = np.sign(pv[idx])
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            same = np.sign(_horner(c, mid)) == sign_lo
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        root = 0.5 * (lo + hi)
        proot = _horner(an, root)
        seg[idx] = np.abs(proot - pa[idx]) + np.abs(pa[idx[:-1] + (j + 1,)] - proot)
    return seg.sum(axis=-1)


@dataclass
class LebesgueFunction:
    """``L(x) = int |K(x, y)| dy`` sampled on a per-cell grid."""

    x: np.ndarray
    values: np.ndarray
    truncation_bound: float
    grid_per_cell: int

    @property
    def constant(self) -> float:
        return float(self.values.max())

    @property
    def argmax(self) -> float:
        return float(self.x[int(np.argmax(self.values))])


def _window_radius(db: DualBasis, eps: float) -> int:
    """Index distance beyond which every weighted inverse entry is below ``eps`` of its row maximum."""
    a = np.abs(db.inverse) * db.basis.support_lengths[None, :]
    n = a.shape[0]
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    if db.basis.periodic:
        dist = np.minimum(dist, n - dist)
    big = a > eps * a.max(axis=1, keepdims=True)
    return int(dist[big].max())


def lebesgue_function(db: DualBasis, grid_per_cell: int = 8, *, eps: float = 1e-17, chunk: int = 256) -> LebesgueFunction:
    """Sample ``x -> int |K(x, y)| dy`` at ``grid_per_cell + 1`` equispaced points of every cell.

    The ``y`` integral is exact per cell up to root location: ``K(x, .)`` is a
    polynomial of degree ``k - 1`` on each cell. Cells farther from ``x``
    than the decay radius of ``(a_ij)`` are skipped; ``truncation_bound``
    bounds what they could contribute.
    """
    if grid_per_cell < 1:
        raise ValueError("grid_per_cell must be >= 1")
    basis = db.basis
    k, n = basis.order, basis.count
    table = basis.cell_table()
    ncell = len(table)
    ainv = db.inverse
    mass = basis.support_lengths / k

    u = np.arange(grid_per_cell + 1) / grid_per_cell
    xcell = np.repeat(np.arange(ncell), len(u))
    xpts = table.points(u).ravel()
    xvals = table.values(u).reshape(-1, k)
    xact = table.active[xcell]

    if k == 1:
        # diagonal Gram matrix: K(x, y) = sum_j N_j(x) N_j(y) / G_jj, so
        # L(x) = sum_j N_j(x) (int N_j) / G_jj with no cancellation
        integral = np.bincount(table.active[:, 0], weights=table.width, minlength=n)
        values = xvals[:, 0] * integral[xact[:, 0]] / db.gram.diagonal()[xact[:, 0]]
        return LebesgueFunction(xpts, values, 0.0, grid_per_cell)

    # power-basis coefficients on [0, 1] of each cell's k active B-splines
    nodes = 0.5 - 0.5 * np.cos((2 * np.arange(k) + 1) * np.pi / (2 * k))
    vinv = np.linalg.inv(np.vander(nodes, k, increasing=True))
    pmat = np.einsum("mr,crp->cmp", vinv, table.values(nodes))

    radius = _window_radius(db, eps) + k + 1
    if basis.periodic:
        if 2 * radius + 1 >= ncell:
            offsets = None
        else:
            offsets = np.arange(-radius, radius + 1)
    else:
        offsets = np.arange(-radius, radius + 1) if 2 * radius + 1 < ncell else None

    values = np.empty(len(xpts))
    tail = 0.0
    for start in range(0, len(xpts), chunk):
        sl = slice(start, start + chunk)
        coef = np.einsum("xp,xpn->xn", xvals[sl], ainv[xact[sl]])
        m = coef.shape[0]
        if offsets is None:
            wc = np.broadcast_to(np.arange(ncell), (m, ncell))
            mask = np.ones(wc.shape, dtype=bool)
        elif basis.periodic:
            wc = np.mod(xcell[sl][:, None] + offsets, ncell)
            mask = np.ones(wc.shape, dtype=bool)
        else:
            raw = xcell[sl][:, None] + offsets
            mask = (raw >= 0) & (raw < ncell)
            wc = np.clip(raw, 0, ncell - 1)
        act = table.active[wc]
        ca = np.take_along_axis(coef, act.reshape(m, -1), axis=1).reshape(act.shape)
        poly = np.einsum("xwmp,xwp->xwm", pmat[wc], ca)
        cell_int = abs_integral_01(poly) * table.width[wc]
        values[sl] = np.where(mask, cell_int, 0.0).sum(axis=1)
        if offsets is not None:
            covered = np.zeros((m, n), dtype=bool)
            covered[np.repeat(np.arange(m), act.shape[1] * k), act.ravel()] = True
            outside = np.where(covered, 0.0, np.abs(coef) * mass[None, :]).sum(axis=1)
            tail = max(tail, float(outside.max()))
    return LebesgueFunction(xpts, values, tail, grid_per_cell)


def lebesgue_constant(db: DualBasis, grid_per_cell: int = 8) -> float:
    """Estimate of ``||P : L^inf -> L^inf|| = sup_x int |K(x, y)| dy`` (a lower bound)."""
    if grid_per_cell < 4:
        raise ValueError("grid_per_cell must be >= 4")
    return lebesgue_function(db, grid_per_cell).constant


# --- bi-infinite sequences through finite windows ----------------------------


@dataclass(frozen=True)
class WindowPolicy:
    """Window half-width in cells around ``supp f`` and the centre point.

    Without an explicit ``radius`` the default is ``max(10k, 3 log(eps) / log(gamma))``,
    the second term only when a decay rate ``gamma`` is known.
    """

    radius: int | None = None
    eps: float = 1e-6
    gamma: float | None = None

    def resolve(self, k: int) -> int:
        if self.radius is not None:
            return int(self.radius)
        r = 10 * k
        if self.gamma is not None and 0.0 < self.gamma < 1.0:
            r = max(r, math.ceil(3.0 * math.log(self.eps) / math.log(self.gamma)))
        return r


@dataclass
class WindowedProjection:
    spline: Spline
    window: tuple[int, int]
    radius: int
    distances: np.ndarray
    magnitudes: np.ndarray
    slope: float
    orthogonality: float
    f_sup: float = field(default=1.0)


def _cell_of(points: np.ndarray, x: float) -> int:
    return int(np.searchsorted(points, x, side="right")) - 1


def window_knots(points: np.ndarray, k: int, support: tuple[float, float], center: float, radius: int):
    """Clamped knots ``s_l .. s_{r+1}`` padded at both ends, indexed like ``points``."""
    a, b = support
    lo_cell = min(_cell_of(points, a), _cell_of(points, center))
    hi_cell = max(_cell_of(points, np.nextafter(b, -np.inf)), _cell_of(points, center))
    left, right = lo_cell - radius, hi_cell + radius
    if left < 0 or right + 1 >= len(points) or not (points[left] < a and b < points[right + 1]):
        raise WindowTooSmall(
            f"window of radius {radius} around [{a}, {b}] does not fit in {len(points)} points"
        )
    return clamp_segment(points[left : right + 2], k, first=left), (left, right)


def project_windowed_biinfinite(
    points,
    k: int,
    f: Callable,
    support: tuple[float, float],
    *,
    center: float | None = None,
    policy: WindowPolicy = WindowPolicy(),
    cells_per_interval: int = 4,
    samples_per_cell: int = 4,
) -> WindowedProjection:
    """Project a compactly supported ``f`` through a clamped window of a long knot sequence.

    ``points[i]`` plays the role of ``s_i``. The window ``[s_l, s_{r+1}]``
    extends ``radius`` cells beyond ``supp f`` and ``center``. The record
    pairs, for each window cell, the index distance ``d(i(x), i(supp f))``
    with the largest sampled ``|Pf(x)|`` in that cell.
    """
    points = np.asarray(points, dtype=np.float64)
    a, b = support
    if center is None:
        center = 0.5 * (a + b)
    radius = policy.resolve(k)
    kv, (left, right) = window_knots(points, k, support, center, radius)
    basis = BSplineBasis(kv)
    breaks = (a, b)
    spline = project(basis, f, cells_per_interval=cells_per_interval, singularities=breaks)

    supp_idx = index_set(basis, a, b)
    table = basis.cell_table()
    u = (np.arange(samples_per_cell) + 0.5) / samples_per_cell
    xs = table.points(u)
    mags = np.abs(spline(xs.ravel())).reshape(xs.shape).max(axis=1)
    dists = np.array([index_distance(index_set(basis, float(x0), float(x1)), supp_idx)
                      for x0, x1 in zip(table.left, table.left + table.width)])
    slope = _envelope_slope(dists, mags)

    resid = moment_vector(basis, lambda x: spline(x) - f(x), cells_per_interval, singularities=breaks).values
    interior = slice(k - 1, basis.count - k + 1)
    fx = np.abs(f(xs.ravel()))
    f_sup = float(fx.max()) if fx.size else 1.0
    return WindowedProjection(spline, (left, right), radius, dists, mags, slope,
                              float(np.max(np.abs(resid[interior]))), f_sup)


def _envelope_slope(dists: np.ndarray, mags: np.ndarray, floor: float = 1e-14) -> float:
    ds = np.unique(dists)
    env = np.array([mags[dists == d].max() for d in ds])
    keep = env > floor * env.max()
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(ds[keep], np.log(env[keep]), 1)[0])


def window_stability(
    points,
    k: int,
    f: Callable,
    support: tuple[float, float],
    *,
    center: float | None = None,
    radius: int | None = None,
    extra: int | None = None,
    samples: int = 64,
) -> float:
    """``max |P_R f - P_{R+extra} f|`` over the cells of ``supp f``, relative to ``||f||_inf``."""
    a, b = support
    radius = 10 * k if radius is None else radius
    extra = k if extra is None else extra
    small = project_windowed_biinfinite(points, k, f, support, center=center, policy=WindowPolicy(radius))
    large = project_windowed_biinfinite(points, k, f, support, center=center, policy=WindowPolicy(radius + extra))
    xs = np.linspace(a, b, samples)
    if center is not None:
        xs = np.append(xs, center)
    diff = np.abs(small.spline(xs) - large.spline(xs)).max()
    return float(diff / small.f_sup)
