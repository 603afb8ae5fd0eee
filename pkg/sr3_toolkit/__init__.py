"""
SR3 Toolkit - Relaxed regularized least squares

Matrix-free SR3 and FISTA solvers, GSVD-based spectral analysis of the relaxed
problem, Pareto-curve tracing and the test problems used to study them.
"""

__version__ = "0.1.0"

from .errors import (DimensionMismatchError, InfeasiblePointError, ManifestMismatchError,
                     NonConvergenceError, RankDeficientError, SingularSystemError, Sr3ToolkitError,
                     UnsupportedShapeError)
from .linops import LinearOperator, OperatorKind
from .prox import Regularizer, RegularizerKind
from .sr3 import FistaOptions, SolveResult, Sr3Config, Sr3Mode, fista_solve, sr3_solve

__all__ = [
    '__version__',
    'DimensionMismatchError',
    'InfeasiblePointError',
    'ManifestMismatchError',
    'NonConvergenceError',
    'RankDeficientError',
    'SingularSystemError',
    'Sr3ToolkitError',
    'UnsupportedShapeError',
    'LinearOperator',
    'OperatorKind',
    'Regularizer',
    'RegularizerKind',
    'FistaOptions',
    'SolveResult',
    'Sr3Config',
    'Sr3Mode',
    'fista_solve',
    'sr3_solve',
]
