"""
Linear Operators - Matrix-free forward and regularization operators
Builds every A and L the solvers work with.

Each operator is a ``scipy.sparse.linalg.LinearOperator`` subclass tagged with an
``OperatorKind``. Dense and tomography kinds keep their storage in ``matrix``;
difference, gradient and stacked kinds are applied without forming a matrix.
"""

import logging
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator

from .errors import DimensionMismatchError
from .sampling import make_generator, standard_normal
from .utils import as_vector, validate_count, validate_nonnegative, validate_positive

logger = logging.getLogger(__name__)

# Direction components below this count as axis-parallel during ray tracing
_PARALLEL_TOL = 1e-12


class OperatorKind(Enum):
    """Storage / application strategy of an operator"""
    DENSE = "dense"
    TOEPLITZ_CONV = "toeplitz_conv"
    DIFF_1D = "diff_1d"
    GRAD_2D = "grad_2d"
    TOMO = "tomo"
    SCALED_STACK = "scaled_stack"

    def __str__(self):
        return self.value.replace('_', ' ').title()


class LinearOperator(ScipyLinearOperator):
    """
    Linear map with apply and adjoint

    Attributes:
        kind: How the operator is stored and applied
        matrix: Dense array or CSR matrix for stored kinds, None otherwise
        params: Construction parameters (kernel name, grid size, angles, ...)
    """

    def __init__(self, kind: OperatorKind, shape: Tuple[int, int],
                 matrix=None, params: Optional[Dict[str, Any]] = None,
                 parts: Optional[Tuple['LinearOperator', 'LinearOperator', float]] = None):
        super().__init__(dtype=np.float64, shape=(int(shape[0]), int(shape[1])))
        self.kind = kind
        self.matrix = matrix
        self.params = dict(params or {})
        self._parts = parts

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def is_identity(self) -> bool:
        return bool(self.params.get('identity', False))

    def _matvec(self, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        if self.matrix is not None:
            return np.asarray(self.matrix @ v).reshape(-1)
        if self.kind == OperatorKind.DIFF_1D:
            return np.diff(v)
        if self.kind == OperatorKind.GRAD_2D:
            nx, ny = self.params['nx'], self.params['ny']
            image = v.reshape(nx, ny)
            return np.concatenate([np.diff(image, axis=1).ravel(), np.diff(image, axis=0).ravel()])
        if self.kind == OperatorKind.SCALED_STACK:
            top, bottom, scale = self._parts
            return np.concatenate([top.matvec(v), scale * bottom.matvec(v)])
        raise NotImplementedError(f"no apply rule for {self.kind}")

    def _rmatvec(self, u):
        u = np.asarray(u, dtype=float).reshape(-1)
        if self.matrix is not None:
            return np.asarray(self.matrix.T @ u).reshape(-1)
        if self.kind == OperatorKind.DIFF_1D:
            return -np.diff(np.concatenate(([0.0], u, [0.0])))
        if self.kind == OperatorKind.GRAD_2D:
            nx, ny = self.params['nx'], self.params['ny']
            split = nx * (ny - 1)
            along_y = u[:split].reshape(nx, ny - 1)
            along_x = u[split:].reshape(nx - 1, ny)
            out = -np.diff(np.pad(along_y, ((0, 0), (1, 1))), axis=1)
            out -= np.diff(np.pad(along_x, ((1, 1), (0, 0))), axis=0)
            return out.ravel()
        if self.kind == OperatorKind.SCALED_STACK:
            top, bottom, scale = self._parts
            return top.rmatvec(u[:top.rows]) + scale * bottom.rmatvec(u[top.rows:])
        raise NotImplementedError(f"no adjoint rule for {self.kind}")

    def _matmat(self, X):
        if self.matrix is not None:
            return np.asarray(self.matrix @ X)
        return np.column_stack([self._matvec(col) for col in np.asarray(X).T])

    def triplets(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row, col, value) arrays of the stored entries"""
        if self.matrix is None:
            coo = scipy.sparse.coo_matrix(to_dense(self))
        else:
            coo = scipy.sparse.coo_matrix(self.matrix)
        return coo.row, coo.col, coo.data

    def __repr__(self):
        return f"LinearOperator(kind={self.kind.value}, shape={self.shape})"


# ============================================================================
# APPLICATION
# ============================================================================

def apply(op: LinearOperator, v) -> np.ndarray:
    """Return op @ v after checking the length of v"""
    return op.matvec(as_vector(v, op.cols, "v"))


def apply_adjoint(op: LinearOperator, u) -> np.ndarray:
    """Return op.T @ u after checking the length of u"""
    return op.rmatvec(as_vector(u, op.rows, "u"))


def to_dense(op: LinearOperator) -> np.ndarray:
    """
    Materialize an operator as a dense array

    Stored kinds are copied directly; matrix-free kinds are applied to the
    columns of the identity.
    """
    if op.matrix is not None:
        if scipy.sparse.issparse(op.matrix):
            return op.matrix.toarray()
        return np.array(op.matrix, dtype=float)
    return op.matmat(np.eye(op.cols))


def operator_norm(op: LinearOperator, tol: float = 1e-10, max_iter: int = 500) -> float:
    """
    Spectral norm of an operator

    Dense storage uses the exact 2-norm. Everything else runs power iteration on
    op.T @ op from a seeded start and returns the estimate inflated by 1% so that
    1/norm**2 is a safe gradient step.
    """
    if op.matrix is not None and not scipy.sparse.issparse(op.matrix):
        return float(np.linalg.norm(op.matrix, 2))

    v = make_generator(0).random(op.cols) - 0.5
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = op.rmatvec(op.matvec(v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        previous, estimate = estimate, np.sqrt(norm_w)
        if abs(estimate - previous) <= tol * estimate:
            break
    return float(1.01 * estimate)


# ============================================================================
# KERNELS
# ============================================================================

def spiky_kernel(t: np.ndarray, sigma: float) -> np.ndarray:
    """Band-limited 'Mexican hat' kernel (1 - (t/s)^2) exp(-(t/s)^2)"""
    s = (np.asarray(t, dtype=float) / sigma) ** 2
    return (1.0 - s) * np.exp(-s)


def gaussian_kernel(t: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur kernel exp(-(t/s)^2)"""
    return np.exp(-(np.asarray(t, dtype=float) / sigma) ** 2)


def gravity_kernel(s: np.ndarray, t: np.ndarray, depth: float) -> np.ndarray:
    """Vertical gravity field of a mass line at the given depth"""
    return depth * (depth ** 2 + (s - t) ** 2) ** (-1.5)


KERNELS: Dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    'spiky': spiky_kernel,
    'gaussian': gaussian_kernel,
}


# ============================================================================
# CONSTRUCTORS
# ============================================================================

def make_dense(matrix, **params) -> LinearOperator:
    """Wrap a 2-D array"""
    matrix = np.array(matrix, dtype=float)
    if matrix.ndim != 2:
        raise DimensionMismatchError(f"dense operator needs a 2-D array, got shape {matrix.shape}")
    return LinearOperator(OperatorKind.DENSE, matrix.shape, matrix=matrix, params=params)


def make_sparse(matrix, kind: OperatorKind = OperatorKind.DENSE, **params) -> LinearOperator:
    """Wrap a sparse matrix (or anything scipy can convert) in CSR storage"""
    matrix = scipy.sparse.csr_matrix(matrix, dtype=float)
    return LinearOperator(kind, matrix.shape, matrix=matrix, params=params)


def make_identity(n: int) -> LinearOperator:
    """Dense n x n identity"""
    validate_count(n, "n")
    return make_dense(np.eye(n), identity=True)


def make_diff_1d(n: int) -> LinearOperator:
    """Forward differences D (n-1 x n) with rows (-1, 1)"""
    validate_count(n, "n", minimum=2)
    return LinearOperator(OperatorKind.DIFF_1D, (n - 1, n), params={'n': n})


def make_grad_2d(nx: int, ny: int) -> LinearOperator:
    """
    Discrete gradient [I_nx (x) D_ny; D_nx (x) I_ny] on an nx x ny image

    Images are flattened row-major, pixel (i, j) at index i * ny + j.
    """
    validate_count(nx, "nx", minimum=2)
    validate_count(ny, "ny", minimum=2)
    rows = nx * (ny - 1) + ny * (nx - 1)
    return LinearOperator(OperatorKind.GRAD_2D, (rows, nx * ny), params={'nx': nx, 'ny': ny})


def make_toeplitz_conv(kernel: Union[str, Callable[[np.ndarray, float], np.ndarray]],
                       n: int, h: float, sigma: float) -> LinearOperator:
    """
    Convolution matrix a_ij = w(t_i - t_j) with t_i = i * h

    Args:
        kernel: Kernel name from ``KERNELS`` or a callable w(t, sigma)
        n: Matrix size
        h: Sample spacing
        sigma: Kernel width

    Returns:
        Dense n x n Toeplitz operator
    """
    validate_count(n, "n")
    validate_positive(sigma, "sigma")
    validate_positive(h, "h")
    if isinstance(kernel, str):
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel '{kernel}', expected one of {sorted(KERNELS)}")
        kernel_name, kernel_fn = kernel, KERNELS[kernel]
    else:
        kernel_name, kernel_fn = getattr(kernel, '__name__', 'custom'), kernel

    offsets = h * np.arange(n)
    matrix = scipy.linalg.toeplitz(kernel_fn(offsets, sigma), kernel_fn(-offsets, sigma))
    params = {'kernel': kernel_name, 'n': n, 'h': h, 'sigma': sigma}
    return LinearOperator(OperatorKind.TOEPLITZ_CONV, (n, n), matrix=matrix, params=params)


def make_gravity(n: int, d: float = 0.25) -> LinearOperator:
    """Midpoint-rule gravity surveying matrix on [0, 1] with depth d"""
    validate_count(n, "n")
    validate_positive(d, "d")
    nodes = (np.arange(n) + 0.5) / n
    matrix = gravity_kernel(nodes[:, None], nodes[None, :], d) / n
    return LinearOperator(OperatorKind.TOEPLITZ_CONV, (n, n), matrix=matrix,
                          params={'kernel': 'gravity', 'n': n, 'depth': d})


def make_gaussian_random(m: int, n: int, seed: int) -> LinearOperator:
    """Dense m x n matrix with i.i.d. standard normal entries"""
    validate_count(m, "m")
    validate_count(n, "n")
    matrix = standard_normal(make_generator(seed), (m, n))
    return LinearOperator(OperatorKind.DENSE, (m, n), matrix=matrix, params={'seed': int(seed)})


def make_scaled_stack(top: LinearOperator, bottom: LinearOperator, scale: float) -> LinearOperator:
    """Vertical stack [top; scale * bottom]"""
    if top.cols != bottom.cols:
        raise DimensionMismatchError(
            f"stacked operators need equal column counts, got {top.cols} and {bottom.cols}")
    validate_nonnegative(scale, "scale")
    return LinearOperator(OperatorKind.SCALED_STACK, (top.rows + bottom.rows, top.cols),
                          params={'scale': float(scale)}, parts=(top, bottom, float(scale)))


def _trace_ray(origin: np.ndarray, direction: np.ndarray, grid: int,
               width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel indices and intersection lengths of one ray with a centered grid"""
    lo = -0.5 * grid * width
    hi = 0.5 * grid * width
    t_enter, t_exit = -np.inf, np.inf
    for axis in (0, 1):
        if abs(direction[axis]) < _PARALLEL_TOL:
            if origin[axis] < lo or origin[axis] > hi:
                return np.empty(0, dtype=int), np.empty(0)
            continue
        t1 = (lo - origin[axis]) / direction[axis]
        t2 = (hi - origin[axis]) / direction[axis]
        t_enter = max(t_enter, min(t1, t2))
        t_exit = min(t_exit, max(t1, t2))
    if not t_exit > t_enter:
        return np.empty(0, dtype=int), np.empty(0)

    crossings = [np.array([t_enter, t_exit])]
    planes = lo + width * np.arange(grid + 1)
    for axis in (0, 1):
        if abs(direction[axis]) >= _PARALLEL_TOL:
            ts = (planes - origin[axis]) / direction[axis]
            crossings.append(ts[(ts > t_enter) & (ts < t_exit)])
    ts = np.unique(np.concatenate(crossings))

    lengths = np.diff(ts)
    mids = origin[None, :] + 0.5 * (ts[:-1] + ts[1:])[:, None] * direction[None, :]
    col = np.clip(np.floor((mids[:, 0] - lo) / width).astype(int), 0, grid - 1)
    row = np.clip(np.floor((mids[:, 1] - lo) / width).astype(int), 0, grid - 1)
    keep = lengths > 1e-12 * width
    return (row * grid + col)[keep], lengths[keep]


def make_parallel_tomo(grid: int, angles: Sequence[float],
                       pixel_width: Optional[float] = None) -> LinearOperator:
    """
    Parallel-beam projector with exact ray/pixel intersection lengths

    The image is a grid x grid block of square pixels centered at the origin,
    pixel (i, j) at row i (y axis) and column j (x axis), flattened to index
    i * grid + j. Each angle contributes ``grid`` rays whose detector offsets sit
    at the pixel-center positions; at 0 degrees the rays run along the y axis, so
    bin k sums column k.

    Args:
        grid: Pixels per side
        angles: Projection angles in degrees
        pixel_width: Side length of a pixel (default 1/grid, the unit square)

    Returns:
        Sparse operator with len(angles) * grid rows and grid**2 columns
    """
    validate_count(grid, "grid", minimum=2)
    angles = [float(a) for a in angles]
    if not angles:
        raise ValueError("at least one projection angle is required")
    width = 1.0 / grid if pixel_width is None else validate_positive(pixel_width, "pixel_width")

    offsets = (np.arange(grid) - 0.5 * (grid - 1)) * width
    rows, cols, vals = [], [], []
    for a_index, angle in enumerate(angles):
        theta = np.deg2rad(angle)
        detector = np.array([np.cos(theta), np.sin(theta)])
        direction = np.array([-np.sin(theta), np.cos(theta)])
        for k, offset in enumerate(offsets):
            pixels, lengths = _trace_ray(offset * detector, direction, grid, width)
            rows.append(np.full(pixels.shape, a_index * grid + k))
            cols.append(pixels)
            vals.append(lengths)

    shape = (len(angles) * grid, grid * grid)
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsr()
    logger.debug(f"Tomography projector {shape} with {matrix.nnz} nonzeros")
    params = {'grid': grid, 'angles': angles, 'pixel_width': width}
    return LinearOperator(OperatorKind.TOMO, shape, matrix=matrix, params=params)
