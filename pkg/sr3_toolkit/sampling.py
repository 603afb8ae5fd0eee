"""
Seeded Sampling - Counter-based random streams for problem generation

All randomness in the toolkit goes through ``make_generator`` so that a seed
fully determines every generated matrix and ground truth.
"""

import numpy as np


def make_generator(seed: int) -> np.random.Generator:
    """Philox counter-based generator for the given seed"""
    return np.random.Generator(np.random.Philox(int(seed)))


def standard_normal(gen: np.random.Generator, size) -> np.ndarray:
    """
    Standard normal samples via the Box-Muller transform

    Draws uniforms from ``gen`` and pairs them, so the output depends only on
    the uniform stream and not on numpy's internal normal sampler.

    Args:
        gen: Generator returned by ``make_generator``
        size: Output shape (int or tuple)

    Returns:
        Array of the requested shape
    """
    count = int(np.prod(size))
    pairs = (count + 1) // 2
    u1 = gen.random(pairs)
    u2 = gen.random(pairs)
    # shift away from zero so log stays finite
    u1 = 1.0 - u1
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    samples = np.empty(2 * pairs)
    samples[0::2] = radius * np.cos(angle)
    samples[1::2] = radius * np.sin(angle)
    return samples[:count].reshape(size)


def signed_amplitudes(gen: np.random.Generator, count: int,
                      low: float = 0.5, high: float = 1.5) -> np.ndarray:
    """Random signs times uniform magnitudes in [low, high]"""
    signs = np.where(gen.random(count) < 0.5, -1.0, 1.0)
    return signs * gen.uniform(low, high, count)


def interior_positions(gen: np.random.Generator, n: int, count: int) -> np.ndarray:
    """Distinct sorted indices drawn uniformly from 1..n-2"""
    if count > max(n - 2, 0):
        raise ValueError(f"cannot place {count} features in {n - 2} interior positions")
    return np.sort(gen.choice(np.arange(1, n - 1), size=count, replace=False))
