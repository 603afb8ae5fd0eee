"""
Shared Utilities - Vector checks, norms and grid helpers
Small helpers used by every solver module.

Validation functions either raise (``as_vector``) or return a
``(is_valid, errors)`` pair so callers can collect every problem at once.
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError

# ============================================================================
# VECTOR VALIDATION (SHARED)
# ============================================================================

def as_vector(v, length: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """
    Coerce input to a 1-D float array and optionally check its length

    Args:
        v: Array-like input
        length: Expected number of entries, or None to skip the check
        name: Label used in the error message

    Returns:
        1-D float64 numpy array
    """
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionMismatchError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def validate_positive(value: float, name: str) -> float:
    """Raise ValueError unless value is a finite positive number"""
    if not (value > 0):
        raise ValueError(f"{name} must be positive, got {value}")
    return float(value)


def validate_nonnegative(value: float, name: str) -> float:
    """Raise ValueError unless value is nonnegative"""
    if not (value >= 0):
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return float(value)


def validate_count(value: int, name: str, minimum: int = 1) -> int:
    """Raise ValueError unless value is an integer of at least ``minimum``"""
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


# ============================================================================
# NORMS AND ERRORS (SHARED)
# ============================================================================

def relative_error(x: np.ndarray, reference: np.ndarray) -> float:
    """Relative 2-norm error, absolute when the reference vanishes"""
    denom = np.linalg.norm(reference)
    diff = np.linalg.norm(np.asarray(x) - np.asarray(reference))
    return float(diff / denom) if denom > 0 else float(diff)


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """Change between successive iterates scaled by max(||old||, 1)"""
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(old), 1.0))


# ============================================================================
# GRID HELPERS (SHARED)
# ============================================================================

def validate_tau_grid(taus: Sequence[float]) -> Tuple[bool, List[str]]:
    """
    Check a tau grid for Pareto tracing

    Args:
        taus: Candidate constraint radii

    Returns:
        Tuple of (is_valid: bool, errors: List[str])
    """
    errors = []
    if len(taus) == 0:
        errors.append("tau grid is empty")
        return False, errors

    values = [float(t) for t in taus]
    if any(not math.isfinite(t) for t in values):
        errors.append("tau values must be finite")
    if any(t < 0 for t in values):
        errors.append("tau values must be nonnegative")
    if any(b <= a for a, b in zip(values, values[1:])):
        errors.append("tau values must be strictly increasing")

    return len(errors) == 0, errors


def linear_tau_grid(tau_max: float, count: int, include_zero: bool = False) -> List[float]:
    """Evenly spaced radii on (0, tau_max], optionally starting at zero"""
    validate_count(count, "count")
    if include_zero:
        return [float(t) for t in np.linspace(0.0, tau_max, count)]
    return [float(t) for t in np.linspace(tau_max / count, tau_max, count)]


def parse_float_list(values: Iterable[str]) -> List[float]:
    """
    Parse repeated or comma separated numbers, accepting ``inf``

    Args:
        values: Raw strings such as ``["1e-2,1", "inf"]``

    Returns:
        Flat list of floats in the order given
    """
    parsed = []
    for raw in values:
        for token in str(raw).split(','):
            token = token.strip()
            if not token:
                continue
            parsed.append(math.inf if token.lower() in ('inf', 'infinity') else float(token))
    return parsed
