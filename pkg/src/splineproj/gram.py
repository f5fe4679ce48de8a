"""Gram matrices and moment vectors by cellwise Gauss-Legendre quadrature.

Spline-times-spline products have degree at most ``2k - 2`` on every knot
cell, so ``k`` Gauss nodes per cell integrate them exactly. General
integrands use a composite rule on subdivided cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .basis import AnyBasis, BSplineBasis, PeriodicBSplineBasis, local_bspline_values
from .errors import NonFiniteSample
from .linalg import BandedSymmetricMatrix, CyclicBandedMatrix

SINGULAR_SHIFT = 1e-12


@lru_cache(maxsize=None)
def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule with ``order`` nodes on each of ``subdivisions`` equal parts of a cell."""

    order: int
    subdivisions: int = 1

    @property
    def reference(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on [0, 1]; the weights sum to 1."""
        xi, w = _gauss01(self.order)
        s = self.subdivisions
        nodes = ((np.arange(s)[:, None] + xi[None, :]) / s).ravel()
        weights = np.tile(w / s, s)
        return nodes, weights

    def on_basis(self, basis: AnyBasis, singularities: Sequence[float] = ()):
        """Composite nodes over the non-empty cells of ``basis``.

        Returns ``(cell, x, weight)`` where ``cell`` indexes
        ``basis.cell_table()``. Cells that contain a declared singularity in
        their interior are split there; a node closer than ``1e-12`` of the
        cell width to a singularity is pushed away by that amount. For
        periodic bases the seam at 0 always counts as a breakpoint, since
        the integrand is sampled on ``[0, 1)`` and may jump there.
        """
        table = basis.cell_table()
        u, w = self.reference
        ncell = len(table)
        cell = np.repeat(np.arange(ncell), len(u))
        x = (table.left[:, None] + u[None, :] * table.width[:, None]).ravel()
        wt = (w[None, :] * table.width[:, None]).ravel()
        if basis.periodic:
            singularities = (*singularities, 0.0)
        if not singularities:
            return cell, x, wt
        sing = np.asarray(singularities, dtype=np.float64)
        if basis.periodic:
            sing = basis.representative(sing)
        right = table.left + table.width
        inside = (sing[None, :] > table.left[:, None]) & (sing[None, :] < right[:, None])
        split_cells = np.flatnonzero(inside.any(axis=1))
        keep = ~np.isin(cell, split_cells)
        cell, x, wt = cell[keep], x[keep], wt[keep]
        xi, wg = _gauss01(self.order)
        extra = []
        for c in split_cells:
            edges = np.unique(np.concatenate([
                table.left[c] + np.linspace(0.0, 1.0, self.subdivisions + 1) * table.width[c],
                sing[inside[c]],
            ]))
            a, b = edges[:-1], edges[1:]
            xs = (a[:, None] + xi[None, :] * (b - a)[:, None]).ravel()
            ws = (wg[None, :] * (b - a)[:, None]).ravel()
            extra.append((np.full(xs.size, c), xs, ws))
        if extra:
            cell = np.concatenate([cell, *(e[0] for e in extra)])
            x = np.concatenate([x, *(e[1] for e in extra)])
            wt = np.concatenate([wt, *(e[2] for e in extra)])
            order = np.lexsort((x, cell))
            cell, x, wt = cell[order], x[order], wt[order]
        tol = SINGULAR_SHIFT * table.width[cell]
        for c0 in sing:
            hit = np.abs(x - c0) < tol
            x[hit] = c0 + np.where(x[hit] >= c0, 1.0, -1.0) * tol[hit]
        return cell, x, wt


class Moments(NamedTuple):
    values: np.ndarray
    error: float


def gram_matrix(basis: BSplineBasis) -> BandedSymmetricMatrix:
    """``G[p, q] = <N_p, N_q>`` with ``k`` Gauss nodes per cell, bandwidth ``k - 1``."""
    k = basis.order
    table = basis.cell_table()
    xi, w = _gauss01(k)
    vals = table.values(xi)
    blocks = np.einsum("cq,cqa,cqb->cab", w[None, :] * table.width[:, None], vals, vals)
    band = np.zeros((k, basis.count))
    p, q = np.tril_indices(k)
    cols = table.active[:, q]
    np.add.at(band, (np.broadcast_to(p - q, cols.shape), cols), blocks[:, p, q])
    return BandedSymmetricMatrix(band)


def periodic_gram_matrix(pbasis: PeriodicBSplineBasis) -> CyclicBandedMatrix:
    """``G[i, j] = <Ñ_i, Ñ_j>`` on the torus, cyclic bandwidth ``k - 1``."""
    k, n = pbasis.order, pbasis.count
    table = pbasis.cell_table()
    xi, w = _gauss01(k)
    vals = table.values(xi)
    blocks = np.einsum("cq,cqa,cqb->cab", w[None, :] * table.width[:, None], vals, vals)
    rows = np.repeat(table.active[:, :, None], k, axis=2)
    cols = np.repeat(table.active[:, None, :], k, axis=1)
    d = np.mod(cols - rows, n)
    sel = d <= k - 1
    band = np.zeros((k, n))
    np.add.at(band, (d[sel], rows[sel]), blocks[sel])
    return CyclicBandedMatrix(band)


def assemble_gram(basis: AnyBasis):
    return periodic_gram_matrix(basis) if basis.periodic else gram_matrix(basis)


def _moments_once(basis: AnyBasis, f: Callable, rule: QuadratureRule, singularities) -> np.ndarray:
    table = basis.cell_table()
    cell, x, wt = rule.on_basis(basis, singularities)
    arg = basis.to_torus(x) if basis.periodic else x
    fx = np.asarray(f(arg), dtype=np.float64)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        bad = arg[~np.isfinite(fx)][0]
        raise NonFiniteSample(f"integrand is not finite at x={bad!r}; declare it as a singularity")
    vals = local_bspline_values(table.knots, table.mu[cell], x, basis.order)
    contrib = (fx * wt)[:, None] * vals
    return np.bincount(table.active[cell].ravel(), weights=contrib.ravel(), minlength=basis.count)


def moment_vector(
    basis: AnyBasis,
    f: Callable,
    cells_per_interval: int = 4,
    *,
    order: int | None = None,
    singularities: Sequence[float] = (),
    estimate_error: bool = False,
) -> Moments:
    """Inner products ``<f, N_i>`` by composite Gauss quadrature.

    ``f`` must accept a numpy array. With ``estimate_error`` the rule is
    repeated on twice as many subcells and the largest difference is
    reported; otherwise ``error`` is NaN.
    """
    if cells_per_interval < 1:
        raise ValueError("cells_per_interval must be >= 1")
    order = order or basis.order + 6
    b = _moments_once(basis, f, QuadratureRule(order, cells_per_interval), singularities)
    err = float("nan")
    if estimate_error:
        b2 = _moments_once(basis, f, QuadratureRule(order, 2 * cells_per_interval), singularities)
        err = float(np.max(np.abs(b2 - b)))
    return Moments(b, err)


def integrate(
    basis: AnyBasis,
    f: Callable,
    cells_per_interval: int = 4,
    *,
    order: int | None = None,
    singularities: Sequence[float] = (),
) -> float:
    """``int f`` over the domain of ``basis`` using its knot cells."""
    order = order or basis.order + 6
    _, x, wt = QuadratureRule(order, cells_per_interval).on_basis(basis, singularities)
    arg = basis.to_torus(x) if basis.periodic else x
    return float(np.dot(np.asarray(f(arg), dtype=np.float64), wt))


def lp_norm(basis: AnyBasis, f: Callable, p: float, cells_per_interval: int = 4, *, order=None, singularities=()) -> float:
    """``||f||_p`` over the domain of ``basis``; ``p = inf`` takes the max over quadrature nodes."""
    order = order or basis.order + 6
    _, x, wt = QuadratureRule(order, cells_per_interval).on_basis(basis, singularities)
    arg = basis.to_torus(x) if basis.periodic else x
    fx = np.abs(np.asarray(f(arg), dtype=np.float64))
    if np.isinf(p):
        return float(fx.max())
    return float(np.dot(fx**p, wt) ** (1.0 / p))
