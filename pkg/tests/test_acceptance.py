"""End-to-end acceptance criteria.

Each test carries a ``criterion`` marker; conftest prints one PASS/FAIL line
per criterion at the end of the session. Run with
``pytest tests/test_acceptance.py -v``.
"""

import math

import numpy as np
import pytest

from splineproj.analysis import (
    KnotLaw,
    check_lemma2_decay,
    fit_inverse_decay,
    is_decreasing,
    run_convergence_experiment,
    sweep_uniform_boundedness,
    tridiagonal_decay_oracle,
    trial_rng,
)
from splineproj.basis import BSplineBasis, PeriodicBSplineBasis
from splineproj.cli import main
from splineproj.gram import periodic_gram_matrix
from splineproj.knots import biinfinite_points, random_knots, uniform_knots
from splineproj.linalg import full_inverse
from splineproj.projector import DualBasis, Spline, lebesgue_function, project, project_windowed_biinfinite, window_stability

AC = {
    1: "partition of unity to 1e-12 on 200 random bases per mode",
    2: "idempotence, self-adjointness and spline reproduction to 1e-8 on 100 cases",
    3: "k=1 projector is the cell average, Lebesgue constant 1.0, inverse Gram diag(1/kappa)",
    4: "hull-weighted inverse decay: gamma < 1 on 200 cases; k=2 uniform within 5% of oracle",
    5: "periodic cyclic decay gamma < 1 on 200 cases; uniform periodic inverse circulant to 1e-14",
    6: "periodic Lebesgue constants bounded in n (ratio <= 1.5), per-k maxima frozen",
    7: "single-cell projection decays: slope < 0, R^2 >= 0.9, tail <= 1e-6",
    8: "comparison function has vanishing interior moments to 1e-8",
    9: "sin order 3 +- 0.25; cusp tracked-point errors decrease for n >= 64",
    10: "windowed projection stable beyond radius 10k to 1e-6, orthogonality to 1e-8",
    11: "CLI reruns with the same config are byte-identical",
}


def criterion(i):
    return pytest.mark.criterion(f"AC{i}", AC[i])


def make_basis(k, n, periodic, rng, ratio):
    kv = random_knots(n, k, rng, ratio, periodic)
    return PeriodicBSplineBasis(kv) if periodic else BSplineBasis(kv)


def trig(rng, terms=4):
    a, b = rng.normal(size=(2, terms))
    c = float(rng.normal())
    m = np.arange(1, terms + 1)

    def f(x):
        x = np.asarray(x, dtype=np.float64)[..., None]
        return (a * np.cos(2 * np.pi * m * x) + b * np.sin(2 * np.pi * m * x)).sum(axis=-1) + c
    return f


def gauss_nodes(breaks, m=20):
    xi, w = np.polynomial.legendre.leggauss(m)
    b = np.unique(breaks)
    a, c = b[:-1], b[1:]
    return (0.5 * (c - a)[:, None] * (xi + 1) + a[:, None]).ravel(), (0.5 * (c - a)[:, None] * w).ravel()


def ensemble(seed, count, periodic, nmax=256):
    for trial in range(count):
        rng = trial_rng(seed, trial, int(periodic))
        k = int(rng.integers(1, 6))
        n = int(rng.integers(max(k, 8), nmax + 1))
        yield k, n, make_basis(k, n, periodic, rng, 10.0 ** rng.uniform(-3, -1))


@criterion(1)
@pytest.mark.parametrize("periodic", [False, True])
def test_partition_of_unity(periodic, record_property):
    worst = 0.0
    for trial in range(200):
        rng = trial_rng(101, trial, int(periodic))
        k = int(rng.integers(1, 6))
        n = int(rng.integers(k if periodic else 1, 513))
        b = make_basis(k, n, periodic, rng, 1e-3)
        lo, hi = (0.0, 1.0) if periodic else (b.kv.lo, b.kv.hi)
        x = rng.uniform(lo, hi, 10_000)
        x[:2] = lo, hi if not periodic else lo
        _, vals = b.local(x)
        worst = max(worst, float(np.abs(vals.sum(axis=-1) - 1.0).max()))
    record_property("detail", f"{'periodic' if periodic else 'clamped'} max |sum N - 1| = {worst:.3e}")
    assert worst <= 1e-12


@criterion(2)
def test_projector_correctness(record_property):
    worst = {"idempotence": 0.0, "self_adjoint": 0.0, "reproduction": 0.0}
    for trial in range(100):
        rng = trial_rng(202, trial)
        periodic = bool(trial % 2)
        k = int(rng.integers(1, 6))
        n = int(rng.integers(max(k, 4), 65))
        b = make_basis(k, n, periodic, rng, 0.05)
        db = DualBasis(b)
        f, g = trig(rng), trig(rng)
        pf, pg = project(b, f, db=db), project(b, g, db=db)
        scale = np.abs(pf.coeffs).max()
        ppf = project(b, pf, db=db)
        worst["idempotence"] = max(worst["idempotence"], np.abs(ppf.coeffs - pf.coeffs).max() / scale)

        breaks = np.concatenate([[0.0, 1.0], b.pk.s]) if periodic else b.knots
        x, w = gauss_nodes(breaks)
        lhs = np.dot(w, pf(x) * g(x))
        rhs = np.dot(w, f(x) * pg(x))
        norm = math.sqrt(np.dot(w, f(x) ** 2) * np.dot(w, g(x) ** 2))
        worst["self_adjoint"] = max(worst["self_adjoint"], abs(lhs - rhs) / norm)

        c = rng.normal(size=b.count)
        s = project(b, Spline(b, c), db=db)
        worst["reproduction"] = max(worst["reproduction"], np.abs(s.coeffs - c).max() / np.abs(c).max())
    record_property("detail", ", ".join(f"{key} {v:.2e}" for key, v in worst.items()))
    assert max(worst.values()) <= 1e-8


def cell_average(a, b):
    """Mean of ``cos 5x + x^2`` over ``[a, b]``, free of cancellation on short cells."""
    m, h = 0.5 * (a + b), b - a
    return np.cos(5 * m) * np.sinc(5 * h / (2 * np.pi)) + (a * a + a * b + b * b) / 3


@criterion(3)
@pytest.mark.parametrize("periodic", [False, True])
def test_indicator_exactness(periodic, record_property):
    worst = 0.0
    f = lambda x: np.cos(5 * np.asarray(x)) + np.asarray(x) ** 2
    for trial in range(20):
        rng = trial_rng(303, trial, int(periodic))
        n = int(rng.integers(1, 300))
        b = make_basis(1, n, periodic, rng, 1e-3)
        db = DualBasis(b)
        p = project(b, f, db=db)
        if periodic:
            s = np.append(b.pk.s, b.pk.s[0] + 1.0)
            avg = cell_average(s[:-1], s[1:])
            # f is taken on [0, 1), so the wrapping cell averages two pieces
            lo, s0 = s[-2], s[0]
            avg[-1] = ((1.0 - lo) * cell_average(lo, 1.0) + s0 * cell_average(0.0, s0)) / (1.0 + s0 - lo)
        else:
            t = b.knots
            avg = cell_average(t[:-1], t[1:])
        worst = max(worst, float(np.abs(p.coeffs - avg).max()))
        assert lebesgue_function(db, 4).constant == 1.0
        np.testing.assert_array_equal(db.inverse, np.diag(1.0 / b.support_lengths))
    record_property("detail", f"{'periodic' if periodic else 'clamped'} max |Pf - average| = {worst:.2e}")
    assert worst <= 1e-12


@criterion(4)
def test_hull_decay_ensemble(record_property):
    gammas = []
    for k, n, b in ensemble(404, 200, periodic=False):
        fit = fit_inverse_decay(DualBasis(b), "hull")
        gammas.append(fit.gamma)
        assert fit.max_violation_ratio <= 1 + 1e-9
    record_property("detail", f"200 clamped cases, max gamma_hat = {max(gammas):.4f}")
    assert max(gammas) < 1


@criterion(4)
def test_hull_decay_matches_oracle(record_property):
    oracle = tridiagonal_decay_oracle(64)
    db = DualBasis(BSplineBasis(uniform_knots(64, 2, periodic=False)))
    hull = fit_inverse_decay(db, "hull")
    maxsupp = fit_inverse_decay(db, "maxsupp")
    record_property(
        "detail",
        f"oracle {oracle:.5f}, hull gamma_hat {hull.gamma:.5f} ({hull.gamma / oracle - 1:+.1%}), "
        f"maxsupp gamma_hat {maxsupp.gamma:.5f} ({maxsupp.gamma / oracle - 1:+.1%})",
    )
    assert abs(hull.gamma / oracle - 1) <= 0.05


@criterion(5)
def test_cyclic_decay_ensemble(record_property):
    gammas = []
    for k, n, b in ensemble(505, 200, periodic=True):
        fit = fit_inverse_decay(DualBasis(b), "hull", "cyclic")
        gammas.append(fit.gamma)
        assert fit.max_violation_ratio <= 1 + 1e-9
    record_property("detail", f"200 periodic cases, max gamma_hat = {max(gammas):.4f}")
    assert max(gammas) < 1


@criterion(5)
@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_uniform_inverse_circulant(k, record_property):
    worst = 0.0
    for n in (16, 64, 256, 512):
        inv = full_inverse(periodic_gram_matrix(PeriodicBSplineBasis(uniform_knots(n, k))))
        rolled = np.array([np.roll(inv[0], i) for i in range(n)])
        worst = max(worst, float(np.abs(inv - rolled).max() / np.abs(inv).max()))
    record_property("detail", f"k={k} circulant deviation {worst:.2e}")
    assert worst <= 1e-14


# per-k maxima of the Lebesgue constant over the sweep below, frozen from the
# first run (random law with min ratio 0.1, seed 0, 25 trials, 4 points per cell)
FROZEN_SWEEP = {2: 2.4333586654515575, 3: 2.5100792321541454, 4: 2.742766463969028}


@criterion(6)
def test_uniform_boundedness(record_property):
    res = sweep_uniform_boundedness([2, 3, 4], [16, 64, 256, 1024], KnotLaw("random", 0.1), 25, seed=0, grid_per_cell=4)
    for k in (2, 3, 4):
        record_property("detail", f"k={k} max {res.per_k_max[k]:.6f}, n-ratio {res.n_ratio(k):.4f}")
    for k in (2, 3, 4):
        assert math.isfinite(res.per_k_max[k])
        assert res.n_ratio(k) <= 1.5
        assert res.per_k_max[k] == pytest.approx(FROZEN_SWEEP[k], rel=1e-9)


@criterion(7)
def test_single_cell_decay(record_property):
    rep = check_lemma2_decay(PeriodicBSplineBasis(uniform_knots(64, 3)), 0)
    record_property(
        "detail",
        f"slope {rep.slope:.4f}, R^2 {rep.r_squared:.4f}, tail at distance {rep.max_distance} "
        f"= {rep.magnitude_at_max_distance:.2e}",
    )
    assert rep.slope < 0
    assert rep.r_squared >= 0.9
    assert rep.magnitude_at_max_distance <= 1e-6


@criterion(8)
def test_interior_moments(record_property):
    worst = 0.0
    for trial in range(12):
        rng = trial_rng(808, trial)
        k = int(rng.integers(1, 6))
        n = int(rng.integers(max(k, 8), 80))
        pb = make_basis(k, n, True, rng, 0.05)
        f = trig(rng)
        for i in rng.choice(n, 3, replace=False):
            rep = check_lemma2_decay(pb, int(i), f=f)
            worst = max(worst, rep.interior_moment_max)
    record_property("detail", f"max relative interior moment {worst:.2e}")
    assert worst <= 1e-8


@criterion(9)
def test_convergence_smooth(record_property):
    table = run_convergence_experiment("sin", [16, 32, 64, 128, 256], 3, knot_law=KnotLaw("uniform"))
    order = table.fitted_order()
    record_property("detail", f"sin k=3 fitted order {order:.4f}")
    assert abs(order - 3) <= 0.25


@criterion(9)
def test_convergence_cusp(record_property):
    table = run_convergence_experiment("cusp13", [64, 128, 256, 512, 1024], 3, (0.1, 0.25, 0.9), knot_law=KnotLaw("uniform"))
    errs = table.tracked_errors()
    for col, x in enumerate(table.tracked_points):
        record_property("detail", f"cusp x={x}: " + " ".join(f"{e:.2e}" for e in errs[:, col]))
    assert all(is_decreasing(errs[:, col], 0.10) for col in range(errs.shape[1]))


@criterion(10)
@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_windowed_biinfinite(k, record_property):
    rng = trial_rng(1010, k)
    pts = biinfinite_points(500, rng, 0.1)
    a, b = -1.3, 2.2
    f = lambda x: np.where((np.asarray(x) >= a) & (np.asarray(x) < b), np.cos(np.asarray(x)) + 2, 0.0)
    change = window_stability(pts, k, f, (a, b), center=0.4)
    wp = project_windowed_biinfinite(pts, k, f, (a, b), center=0.4)
    orth = wp.orthogonality / wp.f_sup
    record_property("detail", f"k={k} window change {change:.2e}, orthogonality {orth:.2e}")
    assert change <= 1e-6
    assert orth <= 1e-8


CLI_RUNS = [
    ["gram", "-k", "3", "--random", "12", "--seed", "5"],
    ["decay", "-k", "2", "--uniform", "64", "--clamped"],
    ["lebesgue", "-k", "3", "--random", "40", "--seed", "2"],
    ["project", "-k", "4", "--random", "30", "--fn", "hat"],
    ["lemma2", "-k", "3", "--uniform", "64"],
    ["converge", "-k", "3", "--fn", "sin", "--ns", "16,32,64,128"],
    ["ensemble", "-k", "2", "--trials", "50", "--seed", "7"],
]


@criterion(11)
@pytest.mark.parametrize("argv", CLI_RUNS, ids=[a[0] for a in CLI_RUNS])
def test_cli_deterministic(argv, tmp_path, record_property):
    stem = tmp_path / argv[0]

    def snapshot():
        assert main([*argv, "--out", str(stem)]) == 0
        return {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}

    first = snapshot()
    for p in tmp_path.iterdir():
        p.unlink()
    second = snapshot()
    assert first.keys() == second.keys() and first
    assert first == second
    record_property("detail", f"{argv[0]}: {len(first)} files identical")
