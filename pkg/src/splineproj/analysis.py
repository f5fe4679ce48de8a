"""Numerical experiments on spline projectors.

* geometric decay of inverse Gram matrices (interval and torus),
* the pointwise bound for sums of dual functions and its three forms,
* decay of periodic projections of single-cell functions, including the
  comparison with the projection on a lifted interval window,
* sweeps of Lebesgue constants over orders, sizes and random knots,
* pointwise and uniform convergence of periodic projections.

Every constant reported here is an empirical estimate computed from the
sampled matrices and points, not a certified bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .basis import (
    BSplineBasis,
    PeriodicBSplineBasis,
    index_distance,
    index_set,
    window_basis,
)
from .errors import DegenerateFit, EmptyCell
from .gram import lp_norm, moment_vector
from .knots import random_knots, uniform_knots
from .projector import DualBasis, lebesgue_function, project

Weighting = Literal["hull", "maxsupp"]
DecayMode = Literal["linear", "cyclic"]


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one experiment tuple.

    The 64-bit ``seed`` and the integer ``key`` (for instance
    ``(k, n, trial)``) go through :class:`numpy.random.SeedSequence`, which
    keys a counter-based Philox stream. Results do not depend on the order in
    which tuples are evaluated.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(v) for v in key))
    return np.random.Generator(np.random.Philox(ss))


# --- decay of inverse Gram matrices -----------------------------------------


@dataclass
class DecayFit:
    """Envelope fit ``weight_ij * |a_ij| <= K * gamma^dist(i, j)`` (empirical).

    ``gamma`` is the least-squares slope of the log envelope and ``K`` the
    smallest constant that makes the bound hold on all fitted pairs, so
    ``max_violation_ratio`` is 1 up to rounding.
    """

    K: float
    gamma: float
    max_violation_ratio: float
    distances: np.ndarray
    envelope: np.ndarray
    r_squared: float
    d_max: int
    weighting: str
    mode: str
    exact_banded: bool = False

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.distances.tolist(), self.envelope.tolist()))

    def summary(self) -> dict:
        return {
            "K_hat": self.K,
            "gamma_hat": self.gamma,
            "max_violation_ratio": self.max_violation_ratio,
            "r_squared": self.r_squared,
            "d_max": self.d_max,
            "weighting": self.weighting,
            "mode": self.mode,
            "exact_banded": self.exact_banded,
            "empirical": True,
        }


def index_distances(n: int, cyclic: bool) -> np.ndarray:
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    return np.minimum(d, n - d) if cyclic else d


def decay_weights(basis, weighting: Weighting, mode: DecayMode) -> np.ndarray:
    kappa = basis.support_lengths
    if weighting == "maxsupp":
        return np.maximum.outer(kappa, kappa)
    if weighting == "hull":
        if basis.periodic and mode == "cyclic":
            return basis.cyclic_hull_matrix()
        if basis.periodic:
            raise ValueError("hull weighting of a periodic basis needs cyclic mode")
        return basis.hull_matrix()
    raise ValueError(f"unknown weighting {weighting!r}")


def fit_inverse_decay(
    db: DualBasis,
    weighting: Weighting = "hull",
    mode: DecayMode | None = None,
    *,
    floor: float = 1e-13,
) -> DecayFit:
    """Fit geometric decay to the weighted magnitudes of the inverse Gram matrix.

    For each distance the largest weighted magnitude forms the envelope.
    Distances are used from 0 up to the first one whose envelope falls below
    ``floor`` times the largest value, where rounding noise takes over.
    """
    basis = db.basis
    mode = mode or ("cyclic" if basis.periodic else "linear")
    a = db.inverse
    n = a.shape[0]
    w = np.abs(a) * decay_weights(basis, weighting, mode)
    dist = index_distances(n, mode == "cyclic")
    dmax_all = int(dist.max())
    env = np.zeros(dmax_all + 1)
    np.maximum.at(env, dist.ravel(), w.ravel())

    off = np.abs(a[dist > 0])
    if off.size == 0 or np.all(off == 0.0):
        k_hat = float(env[0])
        return DecayFit(k_hat, 0.0, 1.0, np.array([0]), env[:1], 1.0, 0, weighting, mode, exact_banded=True)

    low = np.flatnonzero(env <= floor * env.max())
    d_max = int(low[0]) - 1 if low.size else dmax_all
    if d_max + 1 < 3:
        raise DegenerateFit(f"only {d_max + 1} usable distances (need 3)")
    ds = np.arange(d_max + 1)
    logs = np.log(env[: d_max + 1])
    slope, intercept = np.polyfit(ds, logs, 1)
    resid = logs - (slope * ds + intercept)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    gamma = float(math.exp(slope))
    sel = dist <= d_max
    scaled = w[sel] / gamma ** dist[sel].astype(np.float64)
    k_hat = float(scaled.max())
    violation = float((scaled / k_hat).max())
    return DecayFit(k_hat, gamma, violation, ds, env[: d_max + 1], r2, d_max, weighting, mode)


def reweighted_violation(db: DualBasis, fit: DecayFit, weighting: Weighting = "maxsupp") -> float:
    """Largest ratio of another weighting's magnitudes to the bound of ``fit`` over its fitted range."""
    mode = fit.mode
    w = np.abs(db.inverse) * decay_weights(db.basis, weighting, mode)
    dist = index_distances(w.shape[0], mode == "cyclic")
    sel = dist <= fit.d_max
    if fit.exact_banded:
        return float(w[dist == 0].max() / fit.K)
    return float((w[sel] / (fit.K * fit.gamma ** dist[sel].astype(np.float64))).max())


def tridiagonal_decay_oracle(n: int = 64) -> float:
    """Decay ratio of the inverse of the uniform hat-function Gram matrix.

    Built analytically (``h/6 * tridiag(1, 4, 1)`` with halved end
    diagonals), inverted densely, and read off as the ratio of successive
    entries along the middle row.
    """
    h = 1.0 / n
    m = np.diag(np.full(n + 1, 4.0)) + np.diag(np.ones(n), 1) + np.diag(np.ones(n), -1)
    m[0, 0] = m[-1, -1] = 2.0
    inv = np.linalg.inv(m * h / 6.0)
    mid = n // 2
    row = np.abs(inv[mid, mid : mid + 8])
    return float(np.exp(np.mean(np.diff(np.log(row)))))


# --- pointwise bound for dual sums ------------------------------------------


@dataclass
class Lemma1Report:
    p: float
    ratios: tuple[float, float, float]
    chain_holds: bool
    max_abs_f: float
    h_norm: float
    gamma: float
    distances: np.ndarray
    values: np.ndarray

    def summary(self) -> dict:
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "ratio_hull": self.ratios[0],
            "ratio_maxsupp": self.ratios[1],
            "ratio_cell": self.ratios[2],
            "chain_holds": self.chain_holds,
            "max_abs_f": self.max_abs_f,
            "h_norm": self.h_norm,
            "gamma_hat": self.gamma,
        }


def check_lemma1_bound(
    basis: BSplineBasis,
    J: Sequence[int],
    h: Callable,
    p: float,
    sample_xs,
    *,
    db: DualBasis | None = None,
    fit: DecayFit | None = None,
    cells_per_interval: int = 4,
) -> Lemma1Report:
    """Compare ``|f(x)|`` for ``f = sum_{j in J} <h, N_j> N_j^*`` with the three weighted bounds.

    Bounds at ``x`` (with ``d = d(i(x), J)`` and ``gamma`` from ``fit``):

    1. ``gamma^d ||h||_p max_{m in i(x), j in J} kappa_j^(1/p') / h_jm``
    2. ``gamma^d ||h||_p max (max(kappa_m, kappa_j))^(-1/p)``
    3. ``gamma^d ||h||_p |I(x)|^(-1/p)``

    The report holds ``max_x |f(x)| / bound`` for each and whether
    ``bound1 <= bound2 <= bound3`` held at every sample.
    """
    db = db or DualBasis(basis)
    fit = fit or fit_inverse_decay(db, "hull")
    J = sorted(set(int(j) for j in J))
    if not J:
        raise ValueError("J must be non-empty")
    jpos = np.array([basis.position(j) for j in J])
    b = moment_vector(basis, h, cells_per_interval).values
    coeffs = db.inverse[:, jpos] @ b[jpos]
    xs = np.atleast_1d(np.asarray(sample_xs, dtype=np.float64))
    fx = np.abs(basis.combine(coeffs, xs))
    hn = lp_norm(basis, h, p, cells_per_interval)
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    inv_pc = 1.0 - inv_p
    kappa = basis.support_lengths
    hull = basis.hull_matrix()
    t = basis.knots
    mu = basis.locate(xs)
    cell_len = t[mu + 1] - t[mu]
    gamma = fit.gamma

    ratios = np.zeros((len(xs), 3))
    chain = True
    dists = np.zeros(len(xs), dtype=int)
    for s, x in enumerate(xs):
        ix = sorted(index_set(basis, float(x)))
        mpos = np.array([basis.position(m) for m in ix])
        d = index_distance(ix, J)
        dists[s] = d
        decay = gamma**d * hn
        w1 = np.max(kappa[jpos][None, :] ** inv_pc / hull[np.ix_(mpos, jpos)])
        w2 = np.max(np.maximum.outer(kappa[mpos], kappa[jpos]) ** (-inv_p))
        w3 = cell_len[s] ** (-inv_p)
        bounds = decay * np.array([w1, w2, w3])
        chain &= bool(w1 <= w2 * (1 + 1e-12) and w2 <= w3 * (1 + 1e-12))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[s] = np.where(bounds > 0, fx[s] / bounds, np.where(fx[s] > 0, np.inf, 0.0))
    return Lemma1Report(
        float(p), tuple(float(r) for r in ratios.max(axis=0)), chain, float(fx.max()), hn, gamma, dists, fx
    )


# --- single-cell periodic projections -------------------------------------


@dataclass
class Lemma2Report:
    cell: int
    f_sup: float
    slope: float
    intercept: float
    r_squared: float
    max_distance: int
    magnitude_at_max_distance: float
    interior_moment_max: float
    boundary_moment_max: float
    distances: np.ndarray
    magnitudes: np.ndarray
    first_piece: np.ndarray
    second_piece: np.ndarray
    sample_xs: np.ndarray

    def summary(self) -> dict:
        return {
            "cell": self.cell,
            "f_sup": self.f_sup,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "max_distance": self.max_distance,
            "relative_magnitude_at_max_distance": self.magnitude_at_max_distance,
            "interior_moment_max_relative": self.interior_moment_max,
            "boundary_moment_max_relative": self.boundary_moment_max,
        }


def envelope_fit(dists: np.ndarray, mags: np.ndarray, floor: float = 1e-14):
    """Least-squares line through the log of the per-distance maxima.

    Returns ``(slope, intercept, r_squared, distances, envelope)``; values
    below ``floor`` times the largest one are left out of the fit.
    """
    ds = np.unique(dists)
    env = np.array([mags[dists == d].max() for d in ds])
    keep = env > floor * env.max()
    x, y = ds[keep].astype(float), np.log(env[keep])
    if x.size < 2:
        return float("nan"), float("nan"), float("nan"), ds, env
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, ds, env


def check_lemma2_decay(
    pbasis: PeriodicBSplineBasis,
    i: int,
    sample_xs=None,
    *,
    f: Callable | None = None,
    db: DualBasis | None = None,
    samples_per_cell: int = 4,
    cells_per_interval: int = 4,
) -> Lemma2Report:
    """Decay of ``P~ f_i`` away from the cell ``[s_i, s_{i+1}]``.

    ``f_i = f * 1_[s_i, s_{i+1})`` with ``f = 1`` by default. Besides the
    decay fit against the cyclic index distance, the projection is split as
    ``P T f_i + g`` on the lifted window ``[s_i, s_{i+n+1}]``, and the moments
    ``<g, N_j>`` are computed by quadrature: they vanish for the interior
    indices ``j = 0..n-k+1`` and generally not for the boundary ones.
    """
    pk = pbasis.pk
    n, k = pk.n, pk.order
    a, b = pk.point(i), pk.point(i + 1)
    if not b > a:
        raise EmptyCell(f"cell {i} is empty (s_{i} == s_{i + 1})")
    width = b - a
    base = f if f is not None else (lambda x: np.ones_like(np.asarray(x, dtype=np.float64)))

    def fi(x):
        x = np.asarray(x, dtype=np.float64)
        inside = np.mod(x - a, 1.0) < width
        return np.where(inside, base(x), 0.0)

    db = db or DualBasis(pbasis)
    breaks = (a % 1.0, b % 1.0)
    proj = project(pbasis, fi, db=db, cells_per_interval=cells_per_interval, singularities=breaks)

    table = pbasis.cell_table()
    if sample_xs is None:
        u = (np.arange(samples_per_cell) + 0.5) / samples_per_cell
        sample_xs = pbasis.to_torus(table.points(u).ravel())
    xs = np.atleast_1d(np.asarray(sample_xs, dtype=np.float64))
    mags = np.abs(proj(xs))
    cell_xs = a + (np.arange(64) + 0.5) / 64 * width
    f_sup = float(np.abs(fi(pbasis.to_torus(cell_xs))).max())
    supp = index_set(pbasis, a, b)
    dists = np.array([index_distance(index_set(pbasis, float(x)), supp, n) for x in xs])
    slope, intercept, r2, ds, env = envelope_fit(dists, mags)
    dmax = int(dists.max())
    at_max = float(mags[dists == dmax].max() / f_sup)

    # comparison with the projection on the lifted window
    wb = window_basis(pk, i)

    def tf(y):
        return fi(pbasis.to_torus(y))

    # f is sampled on [0, 1), so every seam inside the window is a breakpoint
    seam = tuple(float(z) for z in np.arange(np.floor(wb.kv.lo) + 1.0, wb.kv.hi))
    ptf = project(wb, tf, cells_per_interval=cells_per_interval, singularities=seam)

    def g(y):
        return proj(pbasis.to_torus(y)) - ptf(y)

    gm = moment_vector(wb, g, cells_per_interval, singularities=seam).values
    j = wb.indices
    interior = (j >= 0) & (j <= n - k + 1)
    boundary = ~interior
    rep = a + np.mod(xs - a, 1.0)
    first_piece = ptf(rep)
    second_piece = proj(xs) - first_piece
    return Lemma2Report(
        cell=i,
        f_sup=f_sup,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        max_distance=dmax,
        magnitude_at_max_distance=at_max,
        interior_moment_max=float(np.abs(gm[interior]).max() / f_sup),
        boundary_moment_max=float(np.abs(gm[boundary]).max() / f_sup) if boundary.any() else 0.0,
        distances=dists,
        magnitudes=mags,
        first_piece=first_piece,
        second_piece=second_piece,
        sample_xs=xs,
    )


# --- Lebesgue constant sweeps ------------------------------------------------


@dataclass(frozen=True)
class KnotLaw:
    """``uniform`` knots or ``random`` knots with cells of at least ``min_ratio / n``."""

    kind: Literal["uniform", "random"] = "uniform"
    min_ratio: float = 0.1

    def make(self, n: int, k: int, rng: np.random.Generator | None, periodic: bool = True):
        if self.kind == "uniform":
            return uniform_knots(n, k, periodic)
        return random_knots(n, k, rng, self.min_ratio, periodic)

    def label(self) -> str:
        return "uniform" if self.kind == "uniform" else f"random(min_ratio={self.min_ratio!r})"


@dataclass
class SweepResult:
    rows: list[dict]
    per_k_max: dict[int, float]
    per_k_n_max: dict[int, dict[int, float]]

    def n_ratio(self, k: int) -> float:
        """Largest over smallest per-``n`` maximum for order ``k``."""
        vals = list(self.per_k_n_max[k].values())
        return max(vals) / min(vals)


def sweep_uniform_boundedness(
    orders: Sequence[int],
    ns: Sequence[int],
    knot_law: KnotLaw = KnotLaw(),
    trials: int = 1,
    *,
    seed: int = 0,
    grid_per_cell: int = 4,
    periodic: bool = True,
    nonperiodic: bool = False,
    decay: bool = False,
) -> SweepResult:
    """Lebesgue constants of periodic (and optionally interval) projectors.

    Uniform knots are deterministic, so only one trial is run for them.
    ``per_k_max`` is the empirical counterpart of the order-only constant.
    With ``decay`` each row also carries the hull-weighted decay fit of the
    inverse Gram matrix (cyclic distance for periodic bases).
    """
    rows = []
    n_trials = 1 if knot_law.kind == "uniform" else trials
    kinds = [flag for flag, on in (("periodic", periodic), ("clamped", nonperiodic)) if on]
    for k in orders:
        for n in ns:
            for trial in range(n_trials):
                for kind in kinds:
                    per = kind == "periodic"
                    rng = trial_rng(seed, k, n, trial, int(per))
                    kv = knot_law.make(n, k, rng, per)
                    basis = PeriodicBSplineBasis(kv) if per else BSplineBasis(kv)
                    db = DualBasis(basis)
                    lf = lebesgue_function(db, grid_per_cell)
                    row = {
                        "k": k, "n": n, "trial": trial, "kind": kind,
                        "lebesgue": lf.constant, "argmax": lf.argmax,
                        "truncation_bound": lf.truncation_bound, "mesh_width": kv.mesh_width,
                    }
                    if decay:
                        fit = fit_inverse_decay(db, "hull")
                        row.update(gamma_hat=fit.gamma, K_hat=fit.K, r_squared=fit.r_squared)
                    rows.append(row)
    per_k_max: dict[int, float] = {}
    per_k_n_max: dict[int, dict[int, float]] = {}
    for r in rows:
        per_k_max[r["k"]] = max(per_k_max.get(r["k"], 0.0), r["lebesgue"])
        d = per_k_n_max.setdefault(r["k"], {})
        d[r["n"]] = max(d.get(r["n"], 0.0), r["lebesgue"])
    return SweepResult(rows, per_k_max, per_k_n_max)


# --- convergence ------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    name: str
    f: Callable
    breakpoints: tuple[float, ...] = ()
    smooth: bool = False

    __test__ = False  # not a pytest class


def _cusp(alpha: float, c: float = 0.5):
    def f(x):
        return np.abs(np.asarray(x, dtype=np.float64) - c) ** (-alpha)
    return f


CATALOG: dict[str, TestFunction] = {
    "sin": TestFunction("sin", lambda x: np.sin(2 * np.pi * np.asarray(x)), (), True),
    "hat": TestFunction(
        "hat", lambda x: np.maximum(0.0, 1.0 - np.abs(np.asarray(x) - 0.5) / 0.2), (0.3, 0.5, 0.7)
    ),
    "step": TestFunction("step", lambda x: np.where(np.asarray(x) >= 0.3, 1.0, 0.0), (0.0, 0.3)),
    "cusp13": TestFunction("cusp13", _cusp(1.0 / 3.0), (0.5,)),
    "cusp12": TestFunction("cusp12", _cusp(0.5), (0.5,)),
}


@dataclass
class ConvergenceTable:
    function: str
    order: int
    tracked_points: tuple[float, ...]
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def tracked_errors(self) -> np.ndarray:
        """Shape ``(len(rows), len(tracked_points))``."""
        return np.array([r["tracked_errors"] for r in self.rows])

    def fitted_order(self, column: str = "sup_error") -> float:
        """Slope of ``log(error)`` against ``log(mesh width)``."""
        h = self.column("mesh_width")
        e = self.column(column)
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])

    def to_dict(self) -> dict:
        return asdict(self)


def run_convergence_experiment(
    fn: TestFunction | str,
    ns: Sequence[int],
    k: int,
    tracked_points: Sequence[float] = (0.1, 0.25, 0.9),
    *,
    knot_law: KnotLaw = KnotLaw(),
    seed: int = 0,
    grid_size: int = 4096,
    exclusion: float = 0.05,
    cells_per_interval: int = 4,
) -> ConvergenceTable:
    """Project ``fn`` onto periodic splines for each ``n`` and record the errors.

    ``sup_error`` is taken over the grid ``(j + 1/2) / grid_size``;
    ``sup_error_away`` leaves out points within ``exclusion`` of a
    breakpoint; ``l1_error`` integrates ``|P f - f|`` with the breakpoints
    split out of the quadrature cells. ``tracked_distances`` holds the cyclic
    index distance from each tracked point to the basis functions whose
    support meets a breakpoint (``None`` for functions without breakpoints),
    so its growth with ``n`` can be read off the table.
    """
    if isinstance(fn, str):
        fn = CATALOG[fn]
    ns = list(ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing")
    tracked = tuple(float(x) for x in tracked_points)
    for x in tracked:
        if any(abs(x - c) < 1e-12 for c in fn.breakpoints):
            raise ValueError(f"tracked point {x} sits on a breakpoint of {fn.name}")
    grid = (np.arange(grid_size) + 0.5) / grid_size
    gap = np.min([np.abs(grid - c) for c in fn.breakpoints] + [np.full(grid.shape, np.inf)], axis=0)
    gap = np.minimum(gap, 1.0 - gap)
    away = gap > exclusion
    fgrid = fn.f(grid)
    ftracked = fn.f(np.array(tracked))
    table = ConvergenceTable(fn.name, k, tracked)
    for n in ns:
        pk = knot_law.make(n, k, trial_rng(seed, k, n, 0), True)
        pbasis = PeriodicBSplineBasis(pk)
        proj = project(pbasis, fn.f, cells_per_interval=cells_per_interval, singularities=fn.breakpoints)
        err = np.abs(proj(grid) - fgrid)

        def diff(x, proj=proj):
            return proj(x) - fn.f(x)

        l1 = lp_norm(pbasis, diff, 1.0, cells_per_interval, singularities=fn.breakpoints)
        if fn.breakpoints:
            bad = set().union(*(index_set(pbasis, c) for c in fn.breakpoints))
            dists = [index_distance(index_set(pbasis, x), bad, n) for x in tracked]
        else:
            dists = None
        table.rows.append({
            "n": n,
            "mesh_width": pk.mesh_width,
            "sup_error": float(err.max()),
            "sup_error_away": float(err[away].max()) if away.any() else float("nan"),
            "l1_error": l1,
            "tracked_errors": [float(e) for e in np.abs(proj(np.array(tracked)) - ftracked)],
            "tracked_distances": dists,
        })
    meshes = table.column("mesh_width")
    if np.any(np.diff(meshes) > 0):
        raise ValueError("knot law produced a mesh width that grows with n")
    return table


def is_decreasing(values: Sequence[float], jitter: float = 0.10) -> bool:
    """Each value is at most ``(1 + jitter)`` times the previous one."""
    v = np.asarray(values, dtype=np.float64)
    return bool(np.all(v[1:] <= (1.0 + jitter) * v[:-1]))
