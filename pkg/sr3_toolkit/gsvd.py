"""
GSVD Analysis - Generalized SVD, relaxed-system spectra and standard form
Dense verification tools for the relaxed problem.

The GSVD of (A, L) is written A = U Sigma X, L = V Gamma X with orthogonal U, V,
invertible X and sigma_j^2 + gamma_j^2 = 1 for every pair j = 0..n-1. Pairs are
ordered by decreasing gamma (increasing sigma). Pair j sits on row
j - max(0, n - m) of Sigma and, when j < min(p, n), on row j of Gamma; pairs that
fall outside Sigma have sigma = 0 and pairs outside Gamma have gamma = 0.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatchError, RankDeficientError, SingularSystemError, UnsupportedShapeError
from .linops import LinearOperator, make_dense, operator_norm, to_dense
from .prox import Regularizer, RegularizerKind
from .sr3 import FistaOptions, SolveResult, fista_solve
from .utils import as_vector, validate_positive

logger = logging.getLogger(__name__)

# Singular values below RANK_TOL * largest count as zero
RANK_TOL = 1e-10

# Explicit relaxed-system assembly is a verification tool for small problems only
MAX_DENSE_COLS = 512

MatrixLike = Union[np.ndarray, LinearOperator]


class GsvdRegime(Enum):
    """Shape regime of the pair (A, L)"""
    TALL = "tall"   # p <= n
    WIDE = "wide"   # p > n

    def __str__(self):
        return self.value.title()


def _dense(M: MatrixLike) -> np.ndarray:
    if isinstance(M, LinearOperator):
        return to_dense(M)
    return np.asarray(M, dtype=float)


@dataclass
class GsvdFactors:
    """GSVD factors of (A, L) with per-pair sigma/gamma and rank counts"""
    U: np.ndarray
    V: np.ndarray
    X: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    regime: GsvdRegime
    rank_A: int
    rank_L: int

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def sigma_offset(self) -> int:
        """Number of leading pairs with no row in Sigma"""
        return max(0, self.n - self.m)

    @property
    def shared_pairs(self) -> int:
        """Number of pairs with a row in Gamma"""
        return min(self.p, self.n)

    @property
    def gamma_nonzero(self) -> np.ndarray:
        return self.gamma > RANK_TOL * max(float(np.max(self.gamma, initial=0.0)), 1e-300)

    def sigma_matrix(self) -> np.ndarray:
        """Dense m x n Sigma"""
        S = np.zeros((self.m, self.n))
        for j in range(self.sigma_offset, self.n):
            S[j - self.sigma_offset, j] = self.sigma[j]
        return S

    def gamma_matrix(self) -> np.ndarray:
        """Dense p x n Gamma"""
        G = np.zeros((self.p, self.n))
        for j in range(self.shared_pairs):
            G[j, j] = self.gamma[j]
        return G

    def generalized_values(self) -> np.ndarray:
        """sigma_j / gamma_j for pairs with nonzero gamma, descending"""
        mask = self.gamma_nonzero
        return np.sort(self.sigma[mask] / self.gamma[mask])[::-1]


@dataclass
class RelaxedSystem:
    """Explicit F_kappa, g_kappa and H_kappa = A^T A + kappa L^T L"""
    F_kappa: np.ndarray
    g_kappa: np.ndarray
    H_kappa: np.ndarray
    kappa: float


@dataclass
class StandardForm:
    """Standard-form data: A L_A^+, the dense L_A^+ and the nullspace component"""
    factors: GsvdFactors
    operator: np.ndarray
    pinv: np.ndarray
    x_null: np.ndarray


@dataclass
class StandardFormSolution:
    """General-form solution recovered from a standard-form solve"""
    x: np.ndarray
    y: np.ndarray
    form: StandardForm
    result: Optional[SolveResult] = None


@dataclass
class RelaxedSolution:
    """Reference solution of the relaxed problem from the explicit F_kappa"""
    x: np.ndarray
    y: np.ndarray
    phi: float
    system: RelaxedSystem
    result: Optional[SolveResult] = None


# ============================================================================
# FACTORIZATION
# ============================================================================

def gsvd(A: MatrixLike, L: MatrixLike) -> GsvdFactors:
    """
    Generalized SVD of (A, L) via QR of the stack and a CS split

    [A; L] = Q R; the SVD of the lower block Q2 = V diag(gamma) Z^T gives V and the
    gammas; the columns of Q1 Z are mutually orthogonal with norms sigma, and a QR
    of those columns (largest sigma first) gives U. X = Z^T R with rows rescaled so
    that sigma_j^2 + gamma_j^2 = 1.

    Args:
        A: m x n matrix
        L: p x n matrix

    Returns:
        GsvdFactors
    """
    A = _dense(A)
    L = _dense(L)
    if A.ndim != 2 or L.ndim != 2 or A.shape[1] != L.shape[1]:
        raise DimensionMismatchError(f"A {A.shape} and L {L.shape} must share their column count")
    m, n = A.shape
    p = L.shape[0]
    if m + p < n:
        raise UnsupportedShapeError(f"stack of A {A.shape} and L {L.shape} has fewer rows than columns")

    Q, R = np.linalg.qr(np.vstack([A, L]))
    stack_values = np.linalg.svd(R, compute_uv=False)
    if stack_values[-1] <= RANK_TOL * stack_values[0]:
        raise RankDeficientError("[A; L] does not have full column rank")

    Q1, Q2 = Q[:m], Q[m:]
    V, gamma_values, Zt = np.linalg.svd(Q2, full_matrices=True)
    shared = min(p, n)
    gamma = np.zeros(n)
    gamma[:shared] = np.clip(gamma_values[:shared], 0.0, 1.0)
    Z = Zt.T

    offset = max(0, n - m)
    count = n - offset
    columns = (Q1 @ Z)[:, offset:]
    Uq, Rq = np.linalg.qr(columns[:, ::-1], mode='complete')
    diagonal = np.diag(Rq)[:count]
    signs = np.where(diagonal < 0, -1.0, 1.0)

    sigma = np.zeros(n)
    sigma[offset:] = np.abs(diagonal)[::-1]
    U = np.hstack([(Uq[:, :count] * signs)[:, ::-1], Uq[:, count:]])

    scale = np.sqrt(sigma ** 2 + gamma ** 2)
    sigma = sigma / scale
    gamma = gamma / scale
    X = (Zt @ R) * scale[:, None]

    rank_A = int(np.sum(sigma > RANK_TOL * np.max(sigma)))
    rank_L = int(np.sum(gamma > RANK_TOL * np.max(gamma))) if np.max(gamma) > 0 else 0
    regime = GsvdRegime.TALL if p <= n else GsvdRegime.WIDE
    logger.debug(f"GSVD of A {A.shape}, L {L.shape}: regime={regime.value}, "
                 f"rank_A={rank_A}, rank_L={rank_L}")
    return GsvdFactors(U=U, V=V, X=X, sigma=sigma, gamma=gamma, regime=regime,
                       rank_A=rank_A, rank_L=rank_L)


# ============================================================================
# SPECTRA
# ============================================================================

def fk_singular_values(factors: GsvdFactors, kappa: float) -> np.ndarray:
    """
    Singular values of F_kappa from the GSVD, descending (p values)

    Shared pairs give sqrt(kappa sigma^2 / (sigma^2 + kappa gamma^2)); rows of L
    beyond n give sqrt(kappa). ``kappa = inf`` returns the limits sigma/gamma
    (inf where gamma = 0).
    """
    validate_positive(kappa, "kappa")
    k = factors.shared_pairs
    sigma = factors.sigma[:k]
    gamma = factors.gamma[:k]
    extra = factors.p - k
    if math.isinf(kappa):
        with np.errstate(divide='ignore'):
            values = np.where(factors.gamma_nonzero[:k], sigma / np.where(gamma > 0, gamma, 1.0), np.inf)
        values = np.concatenate([values, np.full(extra, np.inf)])
    else:
        values = np.sqrt(kappa * sigma ** 2 / (sigma ** 2 + kappa * gamma ** 2))
        values = np.concatenate([values, np.full(extra, math.sqrt(kappa))])
    return np.sort(values)[::-1]


def hk_singular_values(A: MatrixLike, L: MatrixLike, kappa: float) -> np.ndarray:
    """Singular values of A^T A + kappa L^T L, descending"""
    A = _dense(A)
    L = _dense(L)
    H = A.T @ A + kappa * (L.T @ L)
    return np.linalg.svd(H, compute_uv=False)


def build_relaxed_system(A: MatrixLike, L: MatrixLike, b, kappa: float) -> RelaxedSystem:
    """
    Assemble F_kappa = [sqrt(k)(I - k L H^-1 L^T); k A H^-1 L^T] and
    g_kappa = [sqrt(k) L H^-1 A^T b; b - A H^-1 A^T b] explicitly

    Only meant for checking the closed forms on small problems.
    """
    validate_positive(kappa, "kappa")
    A = _dense(A)
    L = _dense(L)
    if A.shape[1] != L.shape[1]:
        raise DimensionMismatchError(f"A {A.shape} and L {L.shape} must share their column count")
    n = A.shape[1]
    if n > MAX_DENSE_COLS:
        raise ValueError(f"explicit relaxed system limited to n <= {MAX_DENSE_COLS}, got {n}")
    b = as_vector(b, A.shape[0], "b")
    p = L.shape[0]

    H = A.T @ A + kappa * (L.T @ L)
    try:
        solved = np.linalg.solve(H, np.column_stack([L.T, A.T @ b]))
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"H_kappa is singular: {e}") from e
    HinvLt, Hinv_Atb = solved[:, :p], solved[:, p]

    sqrt_kappa = math.sqrt(kappa)
    F = np.vstack([sqrt_kappa * (np.eye(p) - kappa * (L @ HinvLt)), kappa * (A @ HinvLt)])
    g = np.concatenate([sqrt_kappa * (L @ Hinv_Atb), b - A @ Hinv_Atb])
    return RelaxedSystem(F_kappa=F, g_kappa=g, H_kappa=H, kappa=float(kappa))


# ============================================================================
# STANDARD FORM
# ============================================================================

def a_weighted_pinv_matrix(factors: GsvdFactors) -> np.ndarray:
    """Dense L_A^+ = X^-1 Gamma^+ V^T (n x p)"""
    k = factors.shared_pairs
    gamma_pinv = np.zeros((factors.n, factors.p))
    mask = factors.gamma_nonzero[:k]
    idx = np.flatnonzero(mask)
    gamma_pinv[idx, idx] = 1.0 / factors.gamma[idx]
    return np.linalg.solve(factors.X, gamma_pinv @ factors.V.T)


def a_weighted_pinv_apply(factors: GsvdFactors, y) -> np.ndarray:
    """Apply L_A^+ = X^-1 Gamma^+ V^T to y"""
    y = as_vector(y, factors.p, "y")
    k = factors.shared_pairs
    coeffs = factors.V.T @ y
    w = np.zeros(factors.n)
    mask = factors.gamma_nonzero[:k]
    w[:k][mask] = coeffs[:k][mask] / factors.gamma[:k][mask]
    return np.linalg.solve(factors.X, w)


def nullspace_component(factors: GsvdFactors, A: MatrixLike, b) -> np.ndarray:
    """Least-squares component of the solution in N(L): (A (I - L^+ L))^+ b"""
    m = factors.m
    if isinstance(A, LinearOperator):
        rows = A.rows
    else:
        rows = np.asarray(A).shape[0]
    if rows != m:
        raise DimensionMismatchError(f"A has {rows} rows but the factors were built for {m}")
    b = as_vector(b, m, "b")
    coeffs = factors.U.T @ b
    w = np.zeros(factors.n)
    offset = factors.sigma_offset
    for j in np.flatnonzero(~factors.gamma_nonzero):
        if j >= offset and factors.sigma[j] > 0:
            w[j] = coeffs[j - offset] / factors.sigma[j]
    return np.linalg.solve(factors.X, w)


def standard_form_transform(A: MatrixLike, L: MatrixLike, b,
                            factors: Optional[GsvdFactors] = None) -> StandardForm:
    """Build A L_A^+, L_A^+ and x_N for the pair (A, L)"""
    A = _dense(A)
    L = _dense(L)
    factors = factors or gsvd(A, L)
    pinv = a_weighted_pinv_matrix(factors)
    return StandardForm(factors=factors, operator=A @ pinv, pinv=pinv,
                        x_null=nullspace_component(factors, A, b))


def standard_form_solution(A: MatrixLike, L: MatrixLike, b, reg: Regularizer,
                           options: Optional[FistaOptions] = None,
                           form: Optional[StandardForm] = None) -> StandardFormSolution:
    """
    Solve the general-form problem through its standard form

    y solves min 1/2 ||A L_A^+ y - (b - A x_N)||^2 + R(y) (least squares when R = 0,
    FISTA otherwise); the general-form solution is x = L_A^+ y + x_N.
    """
    options = options or FistaOptions()
    A = _dense(A)
    b = as_vector(b, A.shape[0], "b")
    form = form or standard_form_transform(A, L, b)
    data = b - A @ form.x_null

    result = None
    if reg.kind == RegularizerKind.NONE:
        y = np.linalg.lstsq(form.operator, data, rcond=None)[0]
    else:
        op = make_dense(form.operator)
        norm = operator_norm(op)
        step = 1.0 / norm ** 2 if norm > 0 else 1.0
        result = fista_solve(op, data, reg, step, max_iter=options.max_iter,
                             gap_tol=options.gap_tol, restart=options.restart)
        y = result.x
        if not result.converged:
            logger.warning(f"Standard-form FISTA stopped at max_iter={options.max_iter} "
                           f"with gap {result.gap_history[-1]:.3e}")
    return StandardFormSolution(x=form.pinv @ y + form.x_null, y=y, form=form, result=result)


def standard_form_solve(A: MatrixLike, L: MatrixLike, b, reg: Regularizer,
                        options: Optional[FistaOptions] = None) -> np.ndarray:
    """General-form reference solution x = L_A^+ y + x_N"""
    return standard_form_solution(A, L, b, reg, options).x


def solve_relaxed_dense(A: MatrixLike, L: MatrixLike, b, reg: Regularizer, kappa: float,
                        options: Optional[FistaOptions] = None,
                        system: Optional[RelaxedSystem] = None) -> RelaxedSolution:
    """
    Reference solve of min_y 1/2 ||F_kappa y - g_kappa||^2 + R(y) on the explicit system

    Recovers x = H_kappa^-1 (kappa L^T y + A^T b) and phi_kappa = ||F_kappa y - g_kappa||.
    """
    options = options or FistaOptions()
    A = _dense(A)
    L = _dense(L)
    b = as_vector(b, A.shape[0], "b")
    system = system or build_relaxed_system(A, L, b, kappa)

    result = None
    if reg.kind == RegularizerKind.NONE:
        y = np.linalg.lstsq(system.F_kappa, system.g_kappa, rcond=None)[0]
    else:
        op = make_dense(system.F_kappa)
        norm = operator_norm(op)
        step = 1.0 / norm ** 2 if norm > 0 else 1.0
        result = fista_solve(op, system.g_kappa, reg, step, max_iter=options.max_iter,
                             gap_tol=options.gap_tol, restart=options.restart)
        y = result.x
    x = np.linalg.solve(system.H_kappa, kappa * (L.T @ y) + A.T @ b)
    phi = float(np.linalg.norm(system.F_kappa @ y - system.g_kappa))
    return RelaxedSolution(x=x, y=y, phi=phi, system=system, result=result)
