"""
Proximal Maps - Soft thresholding and l1-ball projection
Regularizer definitions shared by SR3, FISTA and the Pareto tracer.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict

import numpy as np

from .utils import validate_nonnegative, validate_positive

# Relative slack when deciding whether a point lies in the l1 ball
FEASIBILITY_TOL = 1e-9


class RegularizerKind(Enum):
    """Regularization term R applied to L x"""
    L1_PENALTY = "l1_penalty"
    L1_BALL = "l1_ball"
    NONE = "none"

    def __str__(self):
        return self.value.replace('_', ' ').title()


@dataclass(frozen=True)
class Regularizer:
    """
    Regularizer R(y): lambda * ||y||_1, the indicator of ||y||_1 <= tau, or zero

    ``weight`` holds lambda for the penalty and tau for the ball.
    """
    kind: RegularizerKind = RegularizerKind.NONE
    weight: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, RegularizerKind):
            object.__setattr__(self, 'kind', RegularizerKind(self.kind))
        if not math.isfinite(self.weight):
            raise ValueError(f"regularizer weight must be finite, got {self.weight}")
        validate_nonnegative(self.weight, "regularizer weight")

    @classmethod
    def l1_penalty(cls, lam: float) -> 'Regularizer':
        return cls(RegularizerKind.L1_PENALTY, float(lam))

    @classmethod
    def l1_ball(cls, tau: float) -> 'Regularizer':
        return cls(RegularizerKind.L1_BALL, float(tau))

    @classmethod
    def none(cls) -> 'Regularizer':
        return cls(RegularizerKind.NONE, 0.0)

    @property
    def lam(self) -> float:
        return self.weight if self.kind == RegularizerKind.L1_PENALTY else 0.0

    @property
    def tau(self) -> float:
        return self.weight if self.kind == RegularizerKind.L1_BALL else math.inf

    @property
    def is_constraint(self) -> bool:
        return self.kind == RegularizerKind.L1_BALL

    def is_feasible(self, y: np.ndarray) -> bool:
        """True unless y violates the ball constraint beyond the relative slack"""
        if self.kind != RegularizerKind.L1_BALL:
            return True
        return float(np.sum(np.abs(y))) <= self.weight * (1.0 + FEASIBILITY_TOL) + 1e-300

    def value(self, y: np.ndarray) -> float:
        """Evaluate R(y)"""
        if self.kind == RegularizerKind.L1_PENALTY:
            return self.weight * float(np.sum(np.abs(y)))
        if self.kind == RegularizerKind.L1_BALL:
            return 0.0 if self.is_feasible(y) else math.inf
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization"""
        return {'kind': self.kind.value, 'weight': self.weight}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Regularizer':
        """Create Regularizer from dictionary"""
        return cls(RegularizerKind(data['kind']), float(data.get('weight', 0.0)))

    def __str__(self):
        if self.kind == RegularizerKind.L1_PENALTY:
            return f"{self.kind} (lambda={self.weight:g})"
        if self.kind == RegularizerKind.L1_BALL:
            return f"{self.kind} (tau={self.weight:g})"
        return str(self.kind)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    """Componentwise sign(v) * max(|v| - t, 0)"""
    if not t >= 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    """
    Euclidean projection of a nonnegative vector onto {y >= 0, sum(y) = radius}

    Sort-and-threshold: the pivot is taken at the largest k whose sorted entry
    still exceeds its running threshold.
    """
    if radius == 0:
        return np.zeros_like(v)
    decreasing = np.sort(v)[::-1]
    thetas = (np.cumsum(decreasing) - radius) / np.arange(1, decreasing.size + 1)
    pivot = np.max(np.flatnonzero(decreasing - thetas > 0))
    return np.maximum(v - thetas[pivot], 0.0)


def project_l1_ball(v: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection onto {y : ||y||_1 <= tau}"""
    if not tau >= 0:
        raise ValueError(f"l1-ball radius must be nonnegative, got {tau}")
    v = np.asarray(v, dtype=float)
    if np.sum(np.abs(v)) <= tau:
        return v.copy()
    return np.sign(v) * project_simplex(np.abs(v), tau)


def project_linf_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto {z : ||z||_inf <= radius}, the prox of the l1 conjugate"""
    validate_nonnegative(radius, "radius")
    return np.clip(np.asarray(v, dtype=float), -radius, radius)


def prox_apply(reg: Regularizer, v: np.ndarray, step: float) -> np.ndarray:
    """
    Proximal map of step * R at v

    Args:
        reg: Regularizer
        v: Input vector
        step: Positive step size (ignored by the ball projection)

    Returns:
        prox_{step R}(v)
    """
    validate_positive(step, "step")
    if reg.kind == RegularizerKind.L1_PENALTY:
        return soft_threshold(v, step * reg.weight)
    if reg.kind == RegularizerKind.L1_BALL:
        return project_l1_ball(v, reg.weight)
    return np.array(v, dtype=float)
