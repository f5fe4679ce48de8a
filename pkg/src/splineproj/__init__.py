"""Orthogonal projectors onto interval and periodic spline spaces, with numerical checks."""

from .basis import BSplineBasis, PeriodicBSplineBasis, eval_bspline, eval_periodic_bspline, index_distance, index_set
from .errors import ConfigError, NumericalError, SplineProjError
from .gram import assemble_gram, gram_matrix, moment_vector, periodic_gram_matrix
from .knots import (
    KnotVector,
    PeriodicKnotVector,
    lift_cut,
    lift_window,
    random_knots,
    read_knot_file,
    uniform_knots,
    validate_knots,
)
from .linalg import BandedSymmetricMatrix, CyclicBandedMatrix, cholesky_solve, full_inverse
from .projector import DualBasis, Spline, dual_basis, lebesgue_constant, lebesgue_function, project

__version__ = "0.1.0"

__all__ = [
    "BSplineBasis", "PeriodicBSplineBasis", "eval_bspline", "eval_periodic_bspline", "index_distance", "index_set",
    "ConfigError", "NumericalError", "SplineProjError",
    "assemble_gram", "gram_matrix", "moment_vector", "periodic_gram_matrix",
    "KnotVector", "PeriodicKnotVector", "lift_cut", "lift_window", "random_knots", "read_knot_file",
    "uniform_knots", "validate_knots",
    "BandedSymmetricMatrix", "CyclicBandedMatrix", "cholesky_solve", "full_inverse",
    "DualBasis", "Spline", "dual_basis", "lebesgue_constant", "lebesgue_function", "project",
]
