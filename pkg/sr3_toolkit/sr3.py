"""
SR3 Solver - Relaxed variable-splitting solver and FISTA baseline

Solves min_x 1/2 ||Ax - b||^2 + R(Lx) through the relaxation
min_{x,y} 1/2 ||Ax - b||^2 + kappa/2 ||Lx - y||^2 + R(y): alternate a warm-started
LSQR solve of the stacked system [A; sqrt(kappa) L] x = [b; sqrt(kappa) y] with the
proximal y-update y = prox_{R/kappa}(Lx). In inexact mode each inner LSQR stops as
soon as the prospective y-update stagnates.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .errors import DimensionMismatchError, InfeasiblePointError, NonConvergenceError
from .linops import LinearOperator, make_scaled_stack
from .lsqr import LsqrOptions, lsqr_solve, lsqr_solve_shifted
from .prox import Regularizer, RegularizerKind, prox_apply
from .utils import as_vector, relative_change, validate_count, validate_nonnegative, validate_positive

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION AND RESULTS
# ============================================================================

class Sr3Mode(str, Enum):
    """Inner solve strategy"""
    EXACT = "exact"
    INEXACT = "inexact"

    def __str__(self):
        return self.value.title()


class Sr3Config(BaseModel):
    """Parameters of one SR3 solve"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kappa: float = Field(gt=0)
    reg: Regularizer
    inner_eps: float = Field(default=1e-6, gt=0)
    outer_delta: float = Field(default=1e-6, gt=0)
    max_outer: int = Field(default=500, ge=1)
    max_inner: int = Field(default=1000, ge=1)
    mode: Sr3Mode = Sr3Mode.INEXACT
    lsqr_atol: float = Field(default=1e-6, gt=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kappa': self.kappa,
            'reg': self.reg.to_dict(),
            'inner_eps': self.inner_eps,
            'outer_delta': self.outer_delta,
            'max_outer': self.max_outer,
            'max_inner': self.max_inner,
            'mode': self.mode.value,
            'lsqr_atol': self.lsqr_atol,
        }


@dataclass
class FistaOptions:
    """Iteration cap, gap tolerance and restart switch for FISTA"""
    max_iter: int = 5000
    gap_tol: float = 1e-8
    restart: bool = True

    def __post_init__(self):
        validate_count(self.max_iter, "max_iter")
        validate_nonnegative(self.gap_tol, "gap_tol")


@dataclass
class SolveResult:
    """
    Solver output with per-iteration histories

    For SR3, inner_iterations holds the LSQR step count of every outer step; for
    FISTA every entry is 1 (one gradient step).
    """
    x: np.ndarray
    y: np.ndarray
    outer_iterations: int = 0
    inner_iterations: List[int] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    gap_history: List[float] = field(default_factory=list)
    objective_history: List[float] = field(default_factory=list)
    converged: bool = False
    method: str = "sr3"
    stop_reason: str = ""

    @property
    def total_inner_iterations(self) -> int:
        return int(sum(self.inner_iterations))

    @property
    def total_cost(self) -> int:
        """Applications of A (each paired with one of A^T) spent by the solve"""
        if self.method.startswith("sr3"):
            # one extra apply per outer step for the warm-start residual
            return self.total_inner_iterations + self.outer_iterations
        return self.total_inner_iterations

    def raise_if_not_converged(self) -> None:
        if not self.converged:
            raise NonConvergenceError(
                f"{self.method} stopped on {self.stop_reason} after {self.outer_iterations} iterations")

    def to_dict(self, include_vectors: bool = False) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization"""
        data = {
            'method': self.method,
            'converged': self.converged,
            'stop_reason': self.stop_reason,
            'outer_iterations': self.outer_iterations,
            'total_inner_iterations': self.total_inner_iterations,
            'total_cost': self.total_cost,
            'inner_iterations': [int(i) for i in self.inner_iterations],
            'residual_history': [float(r) for r in self.residual_history],
            'gap_history': [float(g) for g in self.gap_history],
            'objective_history': [float(o) for o in self.objective_history],
        }
        if include_vectors:
            data['x'] = [float(v) for v in self.x]
            data['y'] = [float(v) for v in self.y]
        return data

    def history_frame(self) -> pd.DataFrame:
        """Per-iteration histories as a table"""
        return pd.DataFrame({
            'iteration': np.arange(1, self.outer_iterations + 1),
            'inner_iterations': self.inner_iterations,
            'residual': self.residual_history,
            'gap': self.gap_history,
            'objective': self.objective_history,
        })


# ============================================================================
# OBJECTIVES, GAPS AND COUPLING
# ============================================================================

def y_update(reg: Regularizer, v: np.ndarray, kappa: float) -> np.ndarray:
    """The relaxed y-step prox_{R/kappa}(v); an l1 penalty thresholds at lambda/kappa"""
    return prox_apply(reg, v, 1.0 / kappa)


def coupled_lambda(lambda_star: float, kappa: float) -> float:
    """Penalty weight lambda(kappa) = lambda_star * kappa for the relaxed problem"""
    validate_nonnegative(lambda_star, "lambda_star")
    validate_positive(kappa, "kappa")
    return lambda_star * kappa


def relaxed_objective(A: LinearOperator, L: LinearOperator, b: np.ndarray, x: np.ndarray,
                      y: np.ndarray, kappa: float, reg: Regularizer) -> float:
    """1/2 ||Ax - b||^2 + kappa/2 ||Lx - y||^2 + R(y)"""
    fit = A.matvec(x) - b
    split = L.matvec(x) - y
    return 0.5 * float(fit @ fit) + 0.5 * kappa * float(split @ split) + reg.value(y)


def l1_value_bounds(A: LinearOperator, b: np.ndarray, tau: float, y: np.ndarray) -> Tuple[float, float]:
    """
    Lower and upper bounds on min ||Ay - b|| s.t. ||y||_1 <= tau from a feasible y

    Returns (0, 0) when y reproduces b exactly.
    """
    residual = b - A.matvec(y)
    rnorm = float(np.linalg.norm(residual))
    if rnorm == 0.0:
        return 0.0, 0.0
    dual = float(np.max(np.abs(A.rmatvec(residual)))) if residual.size else 0.0
    lower = (float(b @ residual) - tau * dual) / rnorm
    return lower, rnorm


def check_l1_feasible(y: np.ndarray, tau: float) -> None:
    """Raise InfeasiblePointError when ||y||_1 exceeds tau beyond the slack"""
    if not Regularizer.l1_ball(tau).is_feasible(y):
        raise InfeasiblePointError(
            f"point with ||y||_1 = {float(np.sum(np.abs(y))):.6g} exceeds tau = {tau:.6g}")


def duality_gap(A: LinearOperator, b, tau: float, y) -> float:
    """
    Gap between the upper bound ||r|| and the dual lower bound at a feasible y

    Args:
        A: Forward operator
        b: Data
        tau: l1-ball radius
        y: Feasible point, ||y||_1 <= tau

    Returns:
        Nonnegative gap, 0 when the residual vanishes
    """
    validate_nonnegative(tau, "tau")
    b = as_vector(b, A.rows, "b")
    y = as_vector(y, A.cols, "y")
    check_l1_feasible(y, tau)
    lower, upper = l1_value_bounds(A, b, tau, y)
    return max(upper - lower, 0.0)


def lasso_duality_gap(A: LinearOperator, b: np.ndarray, lam: float, x: np.ndarray) -> float:
    """Primal-dual gap of 1/2 ||Ax - b||^2 + lam ||x||_1 with a scaled dual point"""
    residual = b - A.matvec(x)
    primal = 0.5 * float(residual @ residual) + lam * float(np.sum(np.abs(x)))
    correlation = float(np.max(np.abs(A.rmatvec(residual)))) if residual.size else 0.0
    scale = 1.0 if correlation <= lam else lam / correlation
    dual_point = scale * residual
    dual = float(b @ dual_point) - 0.5 * float(dual_point @ dual_point)
    return max(primal - dual, 0.0)


def _original_gap(op: LinearOperator, b: np.ndarray, reg: Regularizer, x: np.ndarray) -> float:
    if reg.kind == RegularizerKind.L1_BALL:
        lower, upper = l1_value_bounds(op, b, reg.weight, x)
        return max(upper - lower, 0.0)
    if reg.kind == RegularizerKind.L1_PENALTY:
        return lasso_duality_gap(op, b, reg.weight, x)
    return float(np.linalg.norm(op.rmatvec(b - op.matvec(x))))


def fixed_point_residuals(A: LinearOperator, L: LinearOperator, b: np.ndarray,
                          config: Sr3Config, result: SolveResult) -> Tuple[float, float]:
    """
    Relative residuals of the SR3 fixed-point equations at a result

    Returns:
        Tuple of (||y - prox(Lx)|| / ||y||, ||H x - A^T b - kappa L^T y|| / ||A^T b||)
    """
    kappa = config.kappa
    x, y = result.x, result.y
    prox_gap = np.linalg.norm(y - y_update(config.reg, L.matvec(x), kappa))
    normal = (A.rmatvec(A.matvec(x)) + kappa * L.rmatvec(L.matvec(x))
              - A.rmatvec(b) - kappa * L.rmatvec(y))
    aty = np.linalg.norm(A.rmatvec(b))
    return (float(prox_gap / max(np.linalg.norm(y), 1e-300)),
            float(np.linalg.norm(normal) / max(aty, 1e-300)))


# ============================================================================
# FISTA BASELINE
# ============================================================================

def fista_solve(op: LinearOperator, b, reg: Regularizer, step: float,
                max_iter: int = 5000, gap_tol: float = 1e-8,
                restart: bool = True) -> SolveResult:
    """
    Accelerated proximal gradient on 1/2 ||op x - b||^2 + R(x)

    Each iteration applies op and op^T once to the extrapolated point. The
    momentum is reset whenever the step direction disagrees with the last
    update (gradient-scheme adaptive restart) unless ``restart`` is False.

    Args:
        op: Forward operator
        b: Data
        reg: Regularizer (the l1 ball uses projection)
        step: Gradient step, at most 1/||op||^2
        max_iter: Iteration cap
        gap_tol: Stop once the duality gap falls to this value

    Returns:
        SolveResult with x = y = final iterate
    """
    validate_positive(step, "step")
    validate_count(max_iter, "max_iter")
    b = as_vector(b, op.rows, "b")
    x = np.zeros(op.cols)
    result = SolveResult(x=x, y=x, method="fista")

    gap = _original_gap(op, b, reg, x)
    if gap <= gap_tol:
        result.converged = True
        result.stop_reason = "gap_tol"
        return result

    z = x.copy()
    t = 1.0
    for iteration in range(1, max_iter + 1):
        gradient = op.rmatvec(op.matvec(z) - b)
        x_new = prox_apply(reg, z - step * gradient, step)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if restart and float((z - x_new) @ (x_new - x)) > 0:
            t_new = 1.0
            z = x_new.copy()
        else:
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new

        residual = op.matvec(x) - b
        gap = _original_gap(op, b, reg, x)
        result.inner_iterations.append(1)
        result.residual_history.append(float(np.linalg.norm(residual)))
        result.gap_history.append(gap)
        result.objective_history.append(0.5 * float(residual @ residual) + reg.value(x))
        result.outer_iterations = iteration
        if gap <= gap_tol:
            result.converged = True
            break

    result.x = x
    result.y = x
    result.stop_reason = "gap_tol" if result.converged else "max_iter"
    logger.info(f"FISTA finished after {result.outer_iterations} iterations, gap {gap:.3e}")
    return result


# ============================================================================
# SR3
# ============================================================================

class _ProspectiveUpdateMonitor:
    """LSQR visitor that stops once prox(L x_l) stagnates"""

    def __init__(self, L: LinearOperator, reg: Regularizer, kappa: float, eps: float,
                 start: np.ndarray):
        self.L = L
        self.reg = reg
        self.kappa = kappa
        self.eps = eps
        self.previous = start

    def __call__(self, iteration: int, x_full: np.ndarray) -> bool:
        candidate = y_update(self.reg, self.L.matvec(x_full), self.kappa)
        change = np.linalg.norm(candidate - self.previous)
        scale = np.linalg.norm(self.previous)
        self.previous = candidate
        if scale == 0.0:
            return bool(change < self.eps)
        return bool(change < self.eps * scale)


def _unregularized(A: LinearOperator, L: LinearOperator, b: np.ndarray,
                   config: Sr3Config) -> SolveResult:
    """R = 0: the relaxation is solved by x = argmin ||Ax - b||, y = Lx"""
    x, stats = lsqr_solve(A, b, LsqrOptions(atol=config.lsqr_atol, max_iter=config.max_inner))
    y = L.matvec(x)
    residual = float(np.linalg.norm(A.matvec(x) - b))
    return SolveResult(
        x=x, y=y, outer_iterations=1, inner_iterations=[stats.iterations],
        residual_history=[residual], gap_history=[0.0],
        objective_history=[0.5 * residual ** 2], converged=True,
        method=f"sr3-{config.mode.value}", stop_reason="least_squares")


def sr3_solve(A: LinearOperator, L: LinearOperator, b, config: Sr3Config) -> SolveResult:
    """
    Run the SR3 outer iteration from x = 0, y = 0

    Args:
        A: Forward operator (m x n)
        L: Regularization operator (p x n)
        b: Data of length m
        config: kappa, regularizer, tolerances, caps and inner mode

    Returns:
        SolveResult; converged is False when max_outer is reached first
    """
    if A.cols != L.cols:
        raise DimensionMismatchError(f"A has {A.cols} columns but L has {L.cols}")
    b = as_vector(b, A.rows, "b")
    reg = config.reg
    kappa = config.kappa
    method = f"sr3-{config.mode.value}"
    if reg.kind == RegularizerKind.NONE:
        return _unregularized(A, L, b, config)

    sqrt_kappa = math.sqrt(kappa)
    stacked = make_scaled_stack(A, L, sqrt_kappa)
    track_gap = reg.is_constraint and L.is_identity

    x = np.zeros(A.cols)
    y = np.zeros(L.rows)
    result = SolveResult(x=x, y=y, method=method, stop_reason="max_outer")
    objective = relaxed_objective(A, L, b, x, y, kappa, reg)
    logger.info(f"SR3 ({config.mode.value}) start: kappa={kappa:g}, {reg}, "
                f"A {A.shape}, L {L.shape}")

    for outer in range(1, config.max_outer + 1):
        rhs = np.concatenate([b, sqrt_kappa * y])
        options = LsqrOptions(atol=config.lsqr_atol, max_iter=config.max_inner)
        if config.mode == Sr3Mode.INEXACT:
            options.callback = _ProspectiveUpdateMonitor(
                L, reg, kappa, config.inner_eps, start=y_update(reg, L.matvec(x), kappa))
        x_new, stats = lsqr_solve_shifted(stacked, rhs, x, options)
        y_new = y_update(reg, L.matvec(x_new), kappa)

        change = relative_change(x_new, x)
        x, y = x_new, y_new
        previous_objective, objective = objective, relaxed_objective(A, L, b, x, y, kappa, reg)

        result.outer_iterations = outer
        result.inner_iterations.append(stats.iterations)
        result.residual_history.append(float(np.linalg.norm(A.matvec(x) - b)))
        result.objective_history.append(objective)
        if track_gap:
            lower, upper = l1_value_bounds(A, b, reg.weight, y)
            result.gap_history.append(max(upper - lower, 0.0))
        else:
            result.gap_history.append(previous_objective - objective)

        logger.debug(f"SR3 outer {outer}: inner={stats.iterations} ({stats.stop_reason.value}), "
                     f"change={change:.3e}, objective={objective:.6e}")
        if change < config.outer_delta:
            result.converged = True
            result.stop_reason = "outer_delta"
            break

    result.x = x
    result.y = y
    if result.converged:
        logger.info(f"SR3 converged after {result.outer_iterations} outer / "
                    f"{result.total_inner_iterations} inner iterations")
    else:
        logger.warning(f"SR3 hit max_outer={config.max_outer} without converging "
                       f"({result.total_inner_iterations} inner iterations)")
    return result
