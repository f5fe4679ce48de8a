"""Command-line front end.

Each subcommand writes its results next to the ``--out`` stem
(``STEM.csv``, ``STEM.json`` and command specific files). Exit codes:
0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis as an
from .basis import BSplineBasis, PeriodicBSplineBasis
from .errors import ConfigError, NumericalError
from .gram import assemble_gram, lp_norm
from .knots import PeriodicKnotVector, random_knots, read_knot_file, uniform_knots
from .output import FORMAT, atomic_write, comment_block, write_csv, write_json, write_matrix
from .projector import DualBasis, lebesgue_function, project

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def run_config(args: argparse.Namespace) -> dict:
    """Serializable echo of the parsed arguments."""
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    cfg["format"] = FORMAT
    return cfg


# --- knot sources -------------------------------------------------------------


def build_knots(args: argparse.Namespace):
    if args.knots is not None:
        kv = read_knot_file(args.knots)
        file_periodic = isinstance(kv, PeriodicKnotVector)
        if args.periodic is not None and args.periodic != file_periodic:
            raise ConfigError(f"--{'periodic' if args.periodic else 'clamped'} contradicts the knot file mode")
        if args.k is not None and args.k != kv.order:
            raise ConfigError(f"-k {args.k} contradicts order {kv.order} in the knot file")
        return kv
    if args.k is None:
        raise ConfigError("-k is required unless --knots is given")
    periodic = True if args.periodic is None else args.periodic
    if args.uniform is not None:
        return uniform_knots(args.uniform, args.k, periodic)
    if args.random is not None:
        return random_knots(args.random, args.k, an.trial_rng(args.seed, args.k, args.random, 0), args.min_ratio, periodic)
    raise ConfigError("one of --knots, --uniform N, --random N is required")


def build_basis(args: argparse.Namespace):
    kv = build_knots(args)
    return PeriodicBSplineBasis(kv) if isinstance(kv, PeriodicKnotVector) else BSplineBasis(kv)


def _law(args: argparse.Namespace) -> an.KnotLaw:
    return an.KnotLaw(args.law, args.min_ratio)


def _stem(args: argparse.Namespace) -> Path:
    return Path(args.out or f"splineproj-{args.command}")


def _with_suffix(stem: Path, suffix: str) -> Path:
    return stem.with_name(stem.name + suffix)


# --- subcommands ---------------------------------------------------------------


def cmd_gram(args) -> list[Path]:
    basis = build_basis(args)
    cfg = run_config(args)
    m = assemble_gram(basis)
    db = DualBasis(basis, m)
    stem = _stem(args)
    dense = m.to_dense()
    summary = {
        "dim": m.dim,
        "bandwidth": m.bandwidth,
        "periodic": basis.periodic,
        "entry_sum": float(dense.sum()),
    }
    if basis.periodic:
        summary["circulant_deviation"] = m.is_circulant()
    return [
        write_matrix(_with_suffix(stem, ".gram.txt"), cfg, dense),
        write_matrix(_with_suffix(stem, ".inverse.txt"), cfg, db.inverse),
        write_json(_with_suffix(stem, ".json"), cfg, summary),
    ]


def cmd_decay(args) -> list[Path]:
    basis = build_basis(args)
    cfg = run_config(args)
    db = DualBasis(basis)
    fit = an.fit_inverse_decay(db, args.weighting, args.mode)
    stem = _stem(args)
    reweighted = an.reweighted_violation(db, fit, "maxsupp") if args.weighting == "hull" else None
    invariants = {
        "gamma_below_one": fit.gamma < 1.0,
        "violation_ratio_at_most_one": fit.max_violation_ratio <= 1.0 + 1e-9,
    }
    if reweighted is not None:
        invariants["maxsupp_reweighted_at_most_one"] = reweighted <= 1.0 + 1e-9
    payload = {"fit": fit.summary(), "maxsupp_reweighted_violation": reweighted, "invariants": invariants}
    return [
        write_csv(_with_suffix(stem, ".csv"), cfg, ["distance", "envelope"], fit.samples),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


def cmd_lebesgue(args) -> list[Path]:
    basis = build_basis(args)
    cfg = run_config(args)
    lf = lebesgue_function(DualBasis(basis), args.grid)
    stem = _stem(args)
    payload = {
        "lebesgue": lf.constant,
        "argmax": lf.argmax,
        "truncation_bound": lf.truncation_bound,
        "grid_per_cell": lf.grid_per_cell,
    }
    return [
        write_csv(_with_suffix(stem, ".csv"), cfg, ["x", "lebesgue_function"], zip(lf.x, lf.values)),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


def cmd_project(args) -> list[Path]:
    basis = build_basis(args)
    cfg = run_config(args)
    fn = an.CATALOG[args.fn]
    spline = project(basis, fn.f, cells_per_interval=args.quad_depth, singularities=fn.breakpoints)
    table = basis.cell_table()
    u = (np.arange(args.grid) + 0.5) / args.grid
    xs = table.points(u).ravel()
    if basis.periodic:
        xs = np.sort(basis.to_torus(xs))
    fx, px = fn.f(xs), spline(xs)

    def diff(x):
        return spline(x) - fn.f(x)

    stem = _stem(args)
    csv_path = _with_suffix(stem, ".csv")
    payload = {
        "function": fn.name,
        "dim": basis.count,
        "sup_error_samples": float(np.max(np.abs(px - fx))),
        "l1_error": lp_norm(basis, diff, 1.0, args.quad_depth, singularities=fn.breakpoints),
        "coefficients": spline.coeffs,
    }
    script = (
        comment_block(cfg)
        + "set datafile separator ','\n"
        + "set key autotitle columnhead\n"
        + f"set title 'orthogonal projection of {fn.name}, k={basis.order}, dim={basis.count}'\n"
        + f"plot '{csv_path.name}' using 1:2 with lines, '' using 1:3 with lines\n"
    )
    return [
        write_csv(csv_path, cfg, ["x", "f", "Pf", "error"], zip(xs, fx, px, px - fx)),
        atomic_write(_with_suffix(stem, ".gp"), script),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


def cmd_lemma2(args) -> list[Path]:
    basis = build_basis(args)
    if not basis.periodic:
        raise ConfigError("lemma2 needs periodic knots")
    cfg = run_config(args)
    db = DualBasis(basis)
    rep = an.check_lemma2_decay(basis, args.cell, db=db, samples_per_cell=args.grid, cells_per_interval=args.quad_depth)
    fit = an.fit_inverse_decay(db, "hull", "cyclic")
    summary = rep.summary()
    payload = {
        "report": summary,
        "cyclic_gamma_hat": fit.gamma,
        "invariants": {
            "negative_slope": rep.slope < 0,
            "r_squared_at_least_0.9": rep.r_squared >= 0.9,
            "max_distance_below_1e-6": rep.magnitude_at_max_distance <= 1e-6,
            "interior_moments_below_1e-8": rep.interior_moment_max <= 1e-8,
            "slope_vs_half_log_gamma": abs(rep.slope) >= abs(math.log(fit.gamma)) / 2 if fit.gamma > 0 else True,
        },
    }
    rows = zip(rep.sample_xs, rep.distances, rep.magnitudes, rep.first_piece, rep.second_piece)
    stem = _stem(args)
    return [
        write_csv(_with_suffix(stem, ".csv"), cfg, ["x", "distance", "abs_projection", "first_piece", "second_piece"], rows),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


def cmd_converge(args) -> list[Path]:
    if args.k is None:
        raise ConfigError("-k is required")
    cfg = run_config(args)
    fn = an.CATALOG[args.fn]
    grid_size = args.grid * max(args.ns)
    table = an.run_convergence_experiment(
        fn, args.ns, args.k, tuple(args.tracked), knot_law=_law(args),
        seed=args.seed, grid_size=grid_size, cells_per_interval=args.quad_depth,
    )
    sup = table.column("sup_error")
    tracked = table.tracked_errors()
    payload = {
        "function": fn.name,
        "order": args.k,
        "fitted_order": table.fitted_order() if fn.smooth else None,
        "final_sup_error": float(sup[-1]),
        "tracked_distances": [r["tracked_distances"] for r in table.rows],
        "scope": "errors at fixed tracked points only; weaker than convergence almost everywhere",
        "invariants": {
            "sup_error_decreases": bool(sup[-1] < sup[0]),
            "tracked_errors_decrease": [an.is_decreasing(tracked[:, j]) for j in range(tracked.shape[1])],
        },
    }
    cols = ["n", "mesh_width", "sup_error", "sup_error_away", "l1_error"] + [f"err_at_{x!r}" for x in table.tracked_points]
    rows = [[r["n"], r["mesh_width"], r["sup_error"], r["sup_error_away"], r["l1_error"], *r["tracked_errors"]] for r in table.rows]
    if fn.breakpoints:
        cols += [f"dist_at_{x!r}" for x in table.tracked_points]
        for row, r in zip(rows, table.rows):
            row.extend(r["tracked_distances"])
    stem = _stem(args)
    return [
        write_csv(_with_suffix(stem, ".csv"), cfg, cols, rows),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


def cmd_ensemble(args) -> list[Path]:
    if args.k is None:
        raise ConfigError("-k is required")
    cfg = run_config(args)
    periodic = True if args.periodic is None else args.periodic
    res = an.sweep_uniform_boundedness(
        [args.k], args.ns, _law(args), args.trials, seed=args.seed, grid_per_cell=args.grid,
        periodic=periodic, nonperiodic=not periodic, decay=True,
    )
    k = args.k
    gammas = [r["gamma_hat"] for r in res.rows]
    payload = {
        "per_k_max": res.per_k_max,
        "per_n_max": res.per_k_n_max[k],
        "n_ratio": res.n_ratio(k),
        "max_gamma_hat": max(gammas),
        "invariants": {
            "gamma_below_one": max(gammas) < 1.0,
            "n_ratio_at_most_1.5": res.n_ratio(k) <= 1.5,
        },
    }
    cols = ["k", "n", "trial", "kind", "lebesgue", "argmax", "truncation_bound", "mesh_width", "gamma_hat", "K_hat", "r_squared"]
    stem = _stem(args)
    return [
        write_csv(_with_suffix(stem, ".csv"), cfg, cols, ([r[c] for c in cols] for r in res.rows)),
        write_json(_with_suffix(stem, ".json"), cfg, payload),
    ]


# --- parser ------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p: argparse.ArgumentParser, knot_source: bool = True) -> None:
    p.add_argument("-k", type=_positive_int, help="spline order (degree + 1)")
    if knot_source:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--knots", metavar="FILE", help="knot file")
        src.add_argument("--uniform", type=_positive_int, metavar="N", help="N uniform cells")
        src.add_argument("--random", type=_positive_int, metavar="N", help="N random cells (see --seed, --min-ratio)")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed for all random draws")
    p.add_argument("--min-ratio", type=float, default=0.1, help="smallest random cell relative to 1/N")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--periodic", dest="periodic", action="store_true", default=None)
    mode.add_argument("--clamped", dest="periodic", action="store_false")
    p.add_argument("--quad-depth", type=_positive_int, default=4, help="quadrature subcells per knot cell")
    p.add_argument("--grid", type=_positive_int, default=8, help="sample points per knot cell")
    p.add_argument("--out", metavar="PATH", help="output stem (default splineproj-<command>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splineproj", description="Orthogonal spline projectors and their numerical checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gram", help="Gram matrix and its inverse")
    _common(p)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("decay", help="geometric decay fit of the inverse Gram matrix")
    _common(p)
    p.add_argument("--weighting", choices=["hull", "maxsupp"], default="hull", help="support weight in the decay bound")
    p.add_argument("--mode", choices=["linear", "cyclic"], default=None, help="index distance (default follows the knots)")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("lebesgue", help="Lebesgue function and constant")
    _common(p)
    p.set_defaults(func=cmd_lebesgue)

    p = sub.add_parser("project", help="project a catalog function and emit a plot script")
    _common(p)
    p.add_argument("--fn", choices=sorted(an.CATALOG), default="sin", help="catalog function")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("lemma2", help="decay of the projection of a single-cell indicator")
    _common(p)
    p.add_argument("--cell", type=int, default=0, help="cell index i of [s_i, s_i+1]")
    p.set_defaults(func=cmd_lemma2)

    for name, func, help_ in (
        ("converge", cmd_converge, "convergence of periodic projections as n grows"),
        ("ensemble", cmd_ensemble, "Lebesgue constants and decay fits over random knots"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p, knot_source=False)
        if name == "converge":
            p.add_argument("--fn", choices=sorted(an.CATALOG), default="sin", help="catalog function")
            p.add_argument("--ns", type=_int_list, default=[16, 32, 64, 128], help="comma separated cell counts")
            p.add_argument("--tracked", type=_float_list, default=[0.1, 0.25, 0.9], help="comma separated points to track")
            p.add_argument("--law", choices=["uniform", "random"], default="uniform", help="knot law per n")
        else:
            p.add_argument("--ns", type=_int_list, default=[16, 64, 256], help="comma separated cell counts")
            p.add_argument("--trials", type=_positive_int, default=10, help="random knot draws per n")
            p.add_argument("--law", choices=["uniform", "random"], default="random", help="knot law per n")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        paths = args.func(args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for p in paths:
        print(p)
    return EXIT_OK
