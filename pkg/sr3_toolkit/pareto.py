"""
Pareto Analysis - Value-function tracing, bounds and corner detection

Traces phi(tau) = min ||Ax - b|| s.t. ||Lx||_1 <= tau for the original problem
(kappa = inf, solved through the standard form) and its relaxed counterpart
phi_kappa(tau) = min_{x, ||y||_1 <= tau} sqrt(||Ax - b||^2 + kappa ||Lx - y||^2).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import Sr3ToolkitError
from .gsvd import (StandardForm, build_relaxed_system, solve_relaxed_dense, standard_form_solution,
                   standard_form_transform)
from .linops import LinearOperator, make_dense, make_scaled_stack, to_dense
from .lsqr import LsqrOptions, lsqr_solve_shifted
from .prox import Regularizer
from .sr3 import FistaOptions, Sr3Config, Sr3Mode, check_l1_feasible, l1_value_bounds, sr3_solve
from .utils import as_vector, validate_positive, validate_tau_grid

logger = logging.getLogger(__name__)

INFINITE_KAPPA = math.inf


@dataclass
class ParetoPoint:
    """One sample of a value function with its certificates"""
    tau: float
    phi: float
    lower_bound: float
    upper_bound: float
    derivative: float
    converged: bool = True
    failed: bool = False
    error_message: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tau': self.tau,
            'phi': self.phi,
            'lower': self.lower_bound,
            'upper': self.upper_bound,
            'derivative': self.derivative,
            'converged': self.converged,
            'failed': self.failed,
        }


@dataclass
class ParetoCurve:
    """Samples of phi_kappa in increasing tau; kappa = inf marks the original problem"""
    points: List[ParetoPoint]
    kappa: float
    corner_index: Optional[int] = None

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    @property
    def phis(self) -> np.ndarray:
        return np.array([p.phi for p in self.points])

    @property
    def is_relaxed(self) -> bool:
        return not math.isinf(self.kappa)

    @property
    def label(self) -> str:
        return "inf" if math.isinf(self.kappa) else f"{self.kappa:g}"

    def to_frame(self) -> pd.DataFrame:
        """CSV-ready table with columns tau, phi, lower, upper, derivative"""
        return pd.DataFrame([p.to_dict() for p in self.points],
                            columns=['tau', 'phi', 'lower', 'upper', 'derivative', 'converged', 'failed'])

    def summary(self) -> Dict[str, Any]:
        corner_tau = None if self.corner_index is None else self.points[self.corner_index].tau
        return {
            'kappa': self.label,
            'points': len(self.points),
            'corner_index': self.corner_index,
            'corner_tau': corner_tau,
            'failed_points': sum(1 for p in self.points if p.failed),
        }


@dataclass
class ParetoOptions:
    """
    Solver settings for curve tracing

    ``method`` selects how finite-kappa points are solved: ``sr3`` runs the
    matrix-free solver, ``dense`` solves the explicit relaxed system (small
    problems, verification).
    """
    method: str = "sr3"
    mode: Sr3Mode = Sr3Mode.INEXACT
    inner_eps: float = 1e-6
    outer_delta: float = 1e-8
    max_outer: int = 2000
    max_inner: int = 1000
    lsqr_atol: float = 1e-8
    bound_atol: float = 1e-12
    fista: FistaOptions = field(default_factory=lambda: FistaOptions(max_iter=20000, gap_tol=1e-10))
    max_workers: int = 1

    def __post_init__(self):
        if self.method not in ('sr3', 'dense'):
            raise ValueError(f"method must be 'sr3' or 'dense', got '{self.method}'")
        if self.max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {self.max_workers}")


@dataclass
class DistanceRow:
    """phi_kappa^2 - phi_inf^2 against its first-order prediction"""
    kappa: float
    lhs: float
    firstorder: float
    remainder: float

    def to_dict(self) -> Dict[str, float]:
        return {'kappa': self.kappa, 'lhs': self.lhs, 'firstorder': self.firstorder,
                'remainder': self.remainder}


# ============================================================================
# BOUNDS
# ============================================================================

def value_fn_bounds(A: LinearOperator, b, tau: float, y_feasible) -> Tuple[float, float]:
    """
    Lower and upper bounds on phi(tau) from a feasible point

    Args:
        A: Forward operator
        b: Data
        tau: l1-ball radius
        y_feasible: Point with ||y||_1 <= tau

    Returns:
        Tuple of (lower, upper)
    """
    b = as_vector(b, A.rows, "b")
    y = as_vector(y_feasible, A.cols, "y_feasible")
    check_l1_feasible(y, tau)
    return l1_value_bounds(A, b, tau, y)


def _derivative(op: LinearOperator, residual: np.ndarray) -> float:
    rnorm = float(np.linalg.norm(residual))
    if rnorm == 0.0:
        return 0.0
    return -float(np.max(np.abs(op.rmatvec(residual)))) / rnorm


def _failed_point(tau: float, error: Exception) -> ParetoPoint:
    logger.warning(f"Pareto point tau={tau:g} failed: {error}")
    nan = float('nan')
    return ParetoPoint(tau=tau, phi=nan, lower_bound=nan, upper_bound=nan, derivative=nan,
                       converged=False, failed=True, error_message=str(error))


# ============================================================================
# POINT SOLVERS
# ============================================================================

def _original_point(A: np.ndarray, L: np.ndarray, b: np.ndarray, tau: float, form: StandardForm,
                    options: ParetoOptions) -> ParetoPoint:
    solution = standard_form_solution(A, L, b, Regularizer.l1_ball(tau), options.fista, form=form)
    op = make_dense(form.operator)
    data = b - A @ form.x_null
    lower, upper = l1_value_bounds(op, data, tau, solution.y)
    converged = solution.result is None or solution.result.converged
    return ParetoPoint(tau=tau, phi=float(np.linalg.norm(A @ solution.x - b)),
                       lower_bound=lower, upper_bound=upper,
                       derivative=_derivative(op, data - op.matvec(solution.y)),
                       converged=converged)


def _relaxed_point_sr3(A: LinearOperator, L: LinearOperator, b: np.ndarray, tau: float,
                       kappa: float, options: ParetoOptions) -> ParetoPoint:
    config = Sr3Config(kappa=kappa, reg=Regularizer.l1_ball(tau), inner_eps=options.inner_eps,
                       outer_delta=options.outer_delta, max_outer=options.max_outer,
                       max_inner=options.max_inner, mode=options.mode, lsqr_atol=options.lsqr_atol)
    result = sr3_solve(A, L, b, config)
    y = result.y

    # re-solve the x-step accurately for the returned y so the bounds are exact
    sqrt_kappa = math.sqrt(kappa)
    stacked = make_scaled_stack(A, L, sqrt_kappa)
    x, _ = lsqr_solve_shifted(stacked, np.concatenate([b, sqrt_kappa * y]), result.x,
                              LsqrOptions(atol=options.bound_atol, max_iter=options.max_inner))

    fit = A.matvec(x) - b
    split = L.matvec(x) - y
    phi = math.sqrt(float(fit @ fit) + kappa * float(split @ split))
    if phi == 0.0:
        return ParetoPoint(tau, 0.0, 0.0, 0.0, 0.0, converged=result.converged)
    w = kappa * split
    dual = float(np.max(np.abs(w)))
    lower = (phi ** 2 + float(y @ w) - tau * dual) / phi
    return ParetoPoint(tau=tau, phi=phi, lower_bound=lower, upper_bound=phi,
                       derivative=-dual / phi, converged=result.converged)


def _relaxed_point_dense(A: np.ndarray, L: np.ndarray, b: np.ndarray, tau: float, kappa: float,
                         system, options: ParetoOptions) -> ParetoPoint:
    solution = solve_relaxed_dense(A, L, b, Regularizer.l1_ball(tau), kappa, options.fista, system=system)
    op = make_dense(system.F_kappa)
    lower, upper = l1_value_bounds(op, system.g_kappa, tau, solution.y)
    converged = solution.result is None or solution.result.converged
    return ParetoPoint(tau=tau, phi=solution.phi, lower_bound=lower, upper_bound=upper,
                       derivative=_derivative(op, system.g_kappa - op.matvec(solution.y)),
                       converged=converged)


# ============================================================================
# TRACING
# ============================================================================

def trace_pareto(A: LinearOperator, L: LinearOperator, b, taus: Sequence[float], kappa: float,
                 options: Optional[ParetoOptions] = None) -> ParetoCurve:
    """
    Sample the value function at each tau

    Args:
        A: Forward operator
        L: Regularization operator
        b: Data
        taus: Strictly increasing nonnegative radii
        kappa: Relaxation parameter, or ``INFINITE_KAPPA`` for the original problem
        options: Solver settings

    Returns:
        ParetoCurve with failed samples flagged rather than raised
    """
    options = options or ParetoOptions()
    is_valid, errors = validate_tau_grid(taus)
    if not is_valid:
        raise ValueError("; ".join(errors))
    validate_positive(kappa, "kappa")
    b = as_vector(b, A.rows, "b")
    taus = [float(t) for t in taus]

    if math.isinf(kappa):
        A_dense, L_dense = to_dense(A), to_dense(L)
        form = standard_form_transform(A_dense, L_dense, b)

        def solve_point(tau):
            return _original_point(A_dense, L_dense, b, tau, form, options)
    elif options.method == 'dense':
        A_dense, L_dense = to_dense(A), to_dense(L)
        system = build_relaxed_system(A_dense, L_dense, b, kappa)

        def solve_point(tau):
            return _relaxed_point_dense(A_dense, L_dense, b, tau, kappa, system, options)
    else:
        def solve_point(tau):
            return _relaxed_point_sr3(A, L, b, tau, kappa, options)

    def guarded(tau):
        try:
            return solve_point(tau)
        except (Sr3ToolkitError, np.linalg.LinAlgError) as e:
            return _failed_point(tau, e)

    if options.max_workers > 1:
        with ThreadPoolExecutor(max_workers=options.max_workers) as executor:
            points = list(executor.map(guarded, taus))
    else:
        points = [guarded(tau) for tau in taus]

    curve = ParetoCurve(points=points, kappa=float(kappa))
    if len(points) >= 5:
        curve.corner_index = corner_detect(curve)
    logger.info(f"Traced {len(points)} Pareto points at kappa={curve.label}, corner={curve.corner_index}")
    return curve


def pareto_distance_check(A: LinearOperator, L: LinearOperator, b, tau: float,
                          kappas: Sequence[float],
                          options: Optional[FistaOptions] = None) -> List[DistanceRow]:
    """
    Compare phi_kappa^2 - phi_inf^2 with its first-order term -||M^T (b - M y_kappa)||^2 / kappa

    M is the standard-form operator A L_A^+ (A itself when L = I). Both curves are
    evaluated with the dense reference solvers.
    """
    options = options or FistaOptions(max_iter=100000, gap_tol=1e-14)
    kappas = [float(k) for k in kappas]
    if any(k <= 0 for k in kappas) or any(b2 <= a for a, b2 in zip(kappas, kappas[1:])):
        raise ValueError("kappas must be positive and strictly increasing")
    b = as_vector(b, A.rows, "b")
    A_dense, L_dense = to_dense(A), to_dense(L)
    reg = Regularizer.l1_ball(tau)

    form = standard_form_transform(A_dense, L_dense, b)
    reference = standard_form_solution(A_dense, L_dense, b, reg, options, form=form)
    phi_inf = float(np.linalg.norm(A_dense @ reference.x - b))
    data = b - A_dense @ form.x_null
    M = form.operator

    rows = []
    for kappa in kappas:
        relaxed = solve_relaxed_dense(A_dense, L_dense, b, reg, kappa, options)
        lhs = relaxed.phi ** 2 - phi_inf ** 2
        correlation = M.T @ (data - M @ relaxed.y)
        firstorder = -float(correlation @ correlation) / kappa
        rows.append(DistanceRow(kappa=kappa, lhs=lhs, firstorder=firstorder, remainder=lhs - firstorder))
        logger.debug(f"Distance check kappa={kappa:g}: lhs={lhs:.6e}, firstorder={firstorder:.6e}")
    return rows


def remainder_decay_rate(rows: Sequence[DistanceRow]) -> float:
    """Slope of -log|remainder| against log kappa (about 2 for an O(1/kappa^2) remainder)"""
    kappas = np.array([r.kappa for r in rows])
    remainders = np.abs(np.array([r.remainder for r in rows]))
    slope = np.polyfit(np.log(kappas), np.log(remainders), 1)[0]
    return float(-slope)


# ============================================================================
# CORNER DETECTION
# ============================================================================

def corner_detect(curve: ParetoCurve, scale: str = "loglog",
                  min_curvature: float = 1e-6) -> Optional[int]:
    """
    Index of the sharpest convex turn of the curve, endpoints excluded

    Uses the signed three-point (Menger) curvature in (log tau, log phi) or, with
    ``scale="linear"``, in tau and phi each rescaled to [0, 1]. Turns from a steep
    descent to a flat tail count as positive.

    Args:
        curve: Traced curve with at least five points
        scale: ``loglog`` or ``linear``
        min_curvature: Curvatures at or below this value do not count as a corner

    Returns:
        Index into curve.points, or None when no convex corner exists
    """
    if len(curve.points) < 5:
        raise ValueError(f"corner detection needs at least 5 points, got {len(curve.points)}")
    if scale not in ('loglog', 'linear'):
        raise ValueError(f"scale must be 'loglog' or 'linear', got '{scale}'")

    phis = curve.phis
    finite = [i for i, p in enumerate(curve.points) if not p.failed and math.isfinite(p.phi)]
    if scale == 'loglog':
        floor = 1e-12 * max((phis[i] for i in finite), default=0.0)
        usable = [i for i in finite if curve.points[i].tau > 0 and phis[i] > floor]
        xs = np.log([curve.points[i].tau for i in usable])
        ys = np.log([phis[i] for i in usable])
    else:
        usable = finite
        xs = np.array([curve.points[i].tau for i in usable])
        ys = np.array([phis[i] for i in usable])
        xs = (xs - xs.min()) / max(np.ptp(xs), 1e-300)
        ys = (ys - ys.min()) / max(np.ptp(ys), 1e-300)
    if len(usable) < 3:
        return None

    best_index, best_curvature = None, min_curvature
    for k in range(1, len(usable) - 1):
        ax, ay = xs[k] - xs[k - 1], ys[k] - ys[k - 1]
        cx, cy = xs[k + 1] - xs[k], ys[k + 1] - ys[k]
        chord = math.hypot(xs[k + 1] - xs[k - 1], ys[k + 1] - ys[k - 1])
        denom = math.hypot(ax, ay) * math.hypot(cx, cy) * chord
        if denom == 0.0:
            continue
        curvature = 2.0 * (ax * cy - ay * cx) / denom
        if curvature > best_curvature:
            best_index, best_curvature = usable[k], curvature
    return best_index
