"""
Seeded random streams for RANDSMAP

All sampling goes through a counter-based Philox generator so that a
(seed, stream) pair gives the same numbers on every platform and thread
count. Gaussian draws use the Box-Muller transform over the generator's
uniforms rather than numpy's ziggurat, which keeps the transform fixed
and documented.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidArgumentError

Shape = Union[int, Tuple[int, ...]]


def make_rng(seed: int, stream: Optional[Sequence[int]] = None) -> np.random.Generator:
    """
    Create a Philox generator for a seed and optional sub-stream key

    Args:
        seed (int): non-negative 64-bit seed
        stream (sequence of int): extra key words (e.g. trajectory index)

    Returns:
        np.random.Generator
    """
    if seed is None or int(seed) < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed}")
    entropy = [int(seed)] + [int(s) for s in (stream or ())]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniform(rng: np.random.Generator, low: float, high: float, size: Shape) -> np.ndarray:
    """Draws from U[low, high); the upper end is excluded even after rounding"""
    u = rng.random(size)
    x = low + (high - low) * u
    if high > low:
        x = np.minimum(x, np.nextafter(high, low))
    return x


def gaussian(rng: np.random.Generator, size: Shape, sigma: float = 1.0) -> np.ndarray:
    """
    Draws from N(0, sigma^2) via Box-Muller

    Uses the cosine branch only, so every normal consumes exactly two
    uniforms in a fixed order.
    """
    u1 = 1.0 - rng.random(size)  # (0, 1]
    u2 = rng.random(size)
    return sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
