"""
Test Problems - Deterministic generators for every experiment

Each generator returns a Problem with noise-free data b = A x_true and the
radius tau_star = ||L x_true||_1. A seed fully determines the problem.
"""

import inspect
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Union

import numpy as np
import scipy.sparse

from . import exports
from .errors import ManifestMismatchError
from .linops import (LinearOperator, make_dense, make_diff_1d, make_gaussian_random, make_grad_2d,
                     make_gravity, make_identity, make_parallel_tomo, make_toeplitz_conv)
from .sampling import interior_positions, make_generator, signed_amplitudes
from .utils import validate_count, validate_positive

logger = logging.getLogger(__name__)

# Modified Shepp-Logan table: intensity, semi-axes a and b, center (x0, y0), rotation in degrees
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


@dataclass
class Problem:
    """Forward operator, regularization operator, data and ground truth"""
    A: LinearOperator
    L: LinearOperator
    b: np.ndarray
    x_true: np.ndarray
    tau_star: float
    name: str
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Manifest entry: enough to regenerate the problem"""
        return {
            'name': self.name,
            'seed': self.seed,
            'params': dict(self.params),
            'sizes': {'m': self.A.rows, 'n': self.A.cols, 'p': self.L.rows},
            'tau_star': self.tau_star,
        }


def _assemble(name: str, A: LinearOperator, L: LinearOperator, x_true: np.ndarray,
              seed: int, params: Dict[str, Any]) -> Problem:
    b = A.matvec(x_true)
    tau_star = float(np.sum(np.abs(L.matvec(x_true))))
    logger.debug(f"Built problem '{name}' A {A.shape}, L {L.shape}, tau_star={tau_star:.6g}")
    return Problem(A=A, L=L, b=b, x_true=x_true, tau_star=tau_star, name=name,
                   seed=int(seed), params=params)


def _sparse_spikes(seed: int, n: int, count: int) -> np.ndarray:
    gen = make_generator(seed)
    x = np.zeros(n)
    x[interior_positions(gen, n, count)] = signed_amplitudes(gen, count)
    return x


def _piecewise_constant(seed: int, n: int, n_jumps: int) -> np.ndarray:
    """Zero baseline with n_jumps steps, so ||D x||_0 = n_jumps"""
    gen = make_generator(seed)
    steps = np.zeros(n)
    steps[interior_positions(gen, n, n_jumps)] = signed_amplitudes(gen, n_jumps)
    return np.cumsum(steps)


# ============================================================================
# GENERATORS
# ============================================================================

def spiky_deconv(n: int = 101, sigma: float = 0.05, n_spikes: int = 5, seed: int = 0) -> Problem:
    """Sparse spike train blurred by the Mexican-hat kernel; L = I"""
    validate_count(n, "n", minimum=3)
    validate_positive(sigma, "sigma")
    A = make_toeplitz_conv('spiky', n, 1.0 / n, sigma)
    x_true = _sparse_spikes(seed, n, n_spikes)
    return _assemble('spiky', A, make_identity(n), x_true, seed,
                     {'n': n, 'sigma': sigma, 'n_spikes': n_spikes})


def compressed_sensing(n: int = 101, m: int = 20, n_spikes: int = 5, seed: int = 0) -> Problem:
    """Sparse signal seen through m Gaussian measurements scaled by 1/sqrt(m); L = I"""
    validate_count(n, "n", minimum=3)
    validate_count(m, "m")
    gaussian = make_gaussian_random(m, n, seed + 1)
    A = make_dense(gaussian.matrix / np.sqrt(m), seed=seed + 1)
    x_true = _sparse_spikes(seed, n, n_spikes)
    return _assemble('cs', A, make_identity(n), x_true, seed,
                     {'n': n, 'm': m, 'n_spikes': n_spikes})


def tv_deconv(n: int = 101, sigma: float = 0.05, n_jumps: int = 4, seed: int = 0) -> Problem:
    """Blocky signal blurred by a Gaussian kernel; L = D"""
    validate_count(n, "n", minimum=3)
    validate_positive(sigma, "sigma")
    A = make_toeplitz_conv('gaussian', n, 1.0 / n, sigma)
    x_true = _piecewise_constant(seed, n, n_jumps)
    return _assemble('tv', A, make_diff_1d(n), x_true, seed,
                     {'n': n, 'sigma': sigma, 'n_jumps': n_jumps})


def gravity_problem(n: int = 512, d: float = 0.25, n_jumps: int = 4, seed: int = 0) -> Problem:
    """Gravity surveying with a piecewise-constant mass density; L = D"""
    validate_count(n, "n", minimum=3)
    A = make_gravity(n, d)
    x_true = _piecewise_constant(seed, n, n_jumps)
    return _assemble('gravity', A, make_diff_1d(n), x_true, seed,
                     {'n': n, 'd': d, 'n_jumps': n_jumps})


def shepp_logan(grid: int) -> np.ndarray:
    """
    Modified Shepp-Logan phantom sampled at pixel centers of [-1, 1]^2

    Row i runs along y and column j along x, matching the tomography pixel order.
    """
    validate_count(grid, "grid", minimum=2)
    centers = -1.0 + (2.0 * np.arange(grid) + 1.0) / grid
    y, x = np.meshgrid(centers, centers, indexing='ij')
    image = np.zeros((grid, grid))
    for intensity, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        angle = np.deg2rad(phi)
        dx, dy = x - x0, y - y0
        u = dx * np.cos(angle) + dy * np.sin(angle)
        v = -dx * np.sin(angle) + dy * np.cos(angle)
        image[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += intensity
    return image


def tomo_problem(grid: int = 32, n_angles: int = 18, seed: int = 0) -> Problem:
    """Parallel-beam tomography of the Shepp-Logan phantom; L = 2-D gradient"""
    validate_count(n_angles, "n_angles")
    angles = np.linspace(0.0, 180.0, n_angles, endpoint=False)
    A = make_parallel_tomo(grid, angles)
    x_true = shepp_logan(grid).ravel()
    return _assemble('tomo', A, make_grad_2d(grid, grid), x_true, seed,
                     {'grid': grid, 'n_angles': n_angles})


def diag_illposed(n: int = 10) -> Problem:
    """A = diag(exp(-(i-1)/2)), x_true = ones; L = I"""
    validate_count(n, "n")
    A = make_dense(np.diag(np.exp(-0.5 * np.arange(n))))
    return _assemble('diag', A, make_identity(n), np.ones(n), 0, {'n': n})


PROBLEMS: Dict[str, Callable[..., Problem]] = {
    'spiky': spiky_deconv,
    'cs': compressed_sensing,
    'tv': tv_deconv,
    'gravity': gravity_problem,
    'tomo': tomo_problem,
    'diag': diag_illposed,
}


def make_problem(name: str, **params) -> Problem:
    """
    Build a problem by registry name

    Parameters the generator does not accept, or that are None, are dropped, so
    callers can pass a common set of knobs (n, grid, seed) to every generator.
    """
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem '{name}', expected one of {sorted(PROBLEMS)}")
    generator = PROBLEMS[name]
    accepted = inspect.signature(generator).parameters
    kwargs = {k: v for k, v in params.items() if k in accepted and v is not None}
    return generator(**kwargs)


# ============================================================================
# PERSISTENCE
# ============================================================================

def save_problem(problem: Problem, directory: Union[str, Path]) -> Path:
    """Write operators as triplets, b and x_true as vectors, plus manifest.json"""
    directory = Path(directory)
    exports.write_triplets(directory / "A.csv", problem.A)
    exports.write_triplets(directory / "L.csv", problem.L)
    exports.write_vector(directory / "b.csv", problem.b, column="b")
    exports.write_vector(directory / "x_true.csv", problem.x_true, column="x_true")
    exports.write_json(directory / "manifest.json", problem.to_dict())
    logger.info(f"Saved problem '{problem.name}' to {directory}")
    return directory


def load_problem(directory: Union[str, Path]) -> Problem:
    """
    Regenerate a saved problem from its manifest and verify the stored data

    Raises:
        ManifestMismatchError: if the stored A, b or x_true differ from the
            regenerated values in any bit
    """
    directory = Path(directory)
    manifest = exports.read_json(directory / "manifest.json")
    problem = make_problem(manifest['name'], seed=manifest.get('seed', 0), **manifest.get('params', {}))

    stored_b = exports.read_vector(directory / "b.csv")
    stored_x = exports.read_vector(directory / "x_true.csv")
    if not np.array_equal(stored_b, problem.b):
        raise ManifestMismatchError(f"stored b in {directory} does not match the regenerated data")
    if not np.array_equal(stored_x, problem.x_true):
        raise ManifestMismatchError(f"stored x_true in {directory} does not match the regenerated data")

    stored_A = exports.read_triplets(directory / "A.csv", problem.A.shape)
    rows, cols, vals = problem.A.triplets()
    regenerated = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=problem.A.shape).tocsr()
    if (stored_A != regenerated).nnz > 0:
        raise ManifestMismatchError(f"stored A in {directory} does not match the regenerated operator")
    return problem
