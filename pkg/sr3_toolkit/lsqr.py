"""
LSQR - Golub-Kahan bidiagonalization least-squares solver

Stock LSQR recurrences (no damping, no reorthogonalization) extended with a
per-iteration callback that sees the current iterate and may stop the solve, and
a warm-start variant that solves for a correction to a given point.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .linops import LinearOperator
from .utils import as_vector, validate_count, validate_nonnegative

logger = logging.getLogger(__name__)

_EPS = np.finfo(np.float64).eps

# Visitor signature: (iteration index starting at 1, full current iterate) -> stop?
LsqrCallback = Callable[[int, np.ndarray], Optional[bool]]


class LsqrStopReason(Enum):
    """Why an LSQR solve ended"""
    ATOL = "atol"
    MAX_ITER = "max_iter"
    CALLBACK = "callback"

    def __str__(self):
        return self.value.replace('_', ' ').title()


@dataclass
class LsqrOptions:
    """Tolerance, iteration cap and optional per-iteration visitor"""
    atol: float = 1e-6
    max_iter: Optional[int] = None
    callback: Optional[LsqrCallback] = None

    def __post_init__(self):
        validate_nonnegative(self.atol, "atol")
        if self.max_iter is not None:
            validate_count(self.max_iter, "max_iter")

    def iteration_cap(self, cols: int) -> int:
        return self.max_iter if self.max_iter is not None else 2 * cols


@dataclass
class LsqrStats:
    """Outcome of one LSQR solve"""
    iterations: int = 0
    final_residual_norm: float = 0.0
    final_normal_residual_norm: float = 0.0
    stop_reason: LsqrStopReason = LsqrStopReason.ATOL

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'final_residual_norm': self.final_residual_norm,
            'final_normal_residual_norm': self.final_normal_residual_norm,
            'stop_reason': self.stop_reason.value,
        }


def _sym_ortho(a: float, b: float) -> Tuple[float, float, float]:
    """Stable Givens rotation (c, s, r) with [c s; -s c] [a; b] = [r; 0]"""
    if b == 0:
        return float(np.sign(a)), 0.0, abs(a)
    if a == 0:
        return 0.0, float(np.sign(b)), abs(b)
    if abs(b) > abs(a):
        tau = a / b
        s = np.sign(b) / np.sqrt(1 + tau * tau)
        c = s * tau
        r = b / s
    else:
        tau = b / a
        c = np.sign(a) / np.sqrt(1 + tau * tau)
        s = c * tau
        r = a / c
    return c, s, r


def lsqr_solve(op: LinearOperator, rhs, options: Optional[LsqrOptions] = None) -> Tuple[np.ndarray, LsqrStats]:
    """
    Minimize ||op x - rhs||_2 starting from x = 0

    Stops when ||op^T r|| / (||op|| ||r||) <= atol (or the residual itself is
    atol-small relative to rhs), when the iteration cap is reached, or when the
    callback returns True. The callback is called once per bidiagonalization
    step with the iteration index and a copy of the iterate.

    Args:
        op: Operator with matvec / rmatvec
        rhs: Right-hand side of length op.rows
        options: Tolerance, cap and callback

    Returns:
        Tuple of (solution, stats)
    """
    options = options or LsqrOptions()
    b = as_vector(rhs, op.rows, "rhs")
    n = op.cols
    x = np.zeros(n)
    stats = LsqrStats()
    iter_lim = options.iteration_cap(n)

    bnorm = np.linalg.norm(b)
    beta = bnorm
    if beta > 0:
        u = b / beta
        v = op.rmatvec(u)
        alfa = np.linalg.norm(v)
    else:
        u = b.copy()
        v = np.zeros(n)
        alfa = 0.0
    if alfa > 0:
        v = v / alfa
    w = v.copy()

    rhobar = alfa
    phibar = beta
    anorm = 0.0
    stats.final_residual_norm = float(beta)
    stats.final_normal_residual_norm = float(alfa * beta)
    if alfa * beta == 0:
        return x, stats

    itn = 0
    while True:
        itn += 1
        u = op.matvec(v) - alfa * u
        beta = np.linalg.norm(u)
        if beta > 0:
            u = u / beta
            anorm = np.sqrt(anorm ** 2 + alfa ** 2 + beta ** 2)
            v = op.rmatvec(u) - beta * v
            alfa = np.linalg.norm(v)
            if alfa > 0:
                v = v / alfa

        cs, sn, rho = _sym_ortho(rhobar, beta)
        theta = sn * alfa
        rhobar = -cs * alfa
        phi = cs * phibar
        phibar = sn * phibar
        tau = sn * phi

        x = x + (phi / rho) * w
        w = v - (theta / rho) * w

        rnorm = abs(phibar)
        arnorm = alfa * abs(tau)
        stats.iterations = itn
        stats.final_residual_norm = float(rnorm)
        stats.final_normal_residual_norm = float(arnorm)

        if options.callback is not None and options.callback(itn, x.copy()):
            stats.stop_reason = LsqrStopReason.CALLBACK
            break
        normal_test = arnorm / (anorm * rnorm + _EPS) if arnorm > 0 else 0.0
        if normal_test <= options.atol or rnorm <= options.atol * bnorm:
            stats.stop_reason = LsqrStopReason.ATOL
            break
        if itn >= iter_lim:
            stats.stop_reason = LsqrStopReason.MAX_ITER
            break

    logger.debug(f"LSQR stopped after {itn} iterations ({stats.stop_reason.value}), "
                 f"residual {stats.final_residual_norm:.3e}")
    return x, stats


def lsqr_solve_shifted(op: LinearOperator, rhs, x0,
                       options: Optional[LsqrOptions] = None) -> Tuple[np.ndarray, LsqrStats]:
    """
    Warm-started LSQR: solve for the correction to x0 and return x0 + correction

    The correction system has right-hand side rhs - op x0 and a fresh Krylov
    space. A callback in ``options`` receives the full iterate x0 + correction.
    """
    options = options or LsqrOptions()
    b = as_vector(rhs, op.rows, "rhs")
    start = as_vector(x0, op.cols, "x0")

    shifted = options
    if options.callback is not None:
        user_callback = options.callback
        shifted = LsqrOptions(atol=options.atol, max_iter=options.max_iter,
                              callback=lambda itn, dx: user_callback(itn, start + dx))

    correction, stats = lsqr_solve(op, b - op.matvec(start), shifted)
    return start + correction, stats
