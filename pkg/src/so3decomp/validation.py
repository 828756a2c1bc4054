"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np

__all__ = ["check_rng", "check_quaternions", "check_positive", "check_nonnegative"]


def check_rng(seed_or_rng=None) -> np.random.Generator:
    """Return a numpy Generator from a seed, an existing Generator, or None."""
    if seed_or_rng is None:
        return np.random.default_rng()
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if isinstance(seed_or_rng, (int, np.integer, np.random.SeedSequence)):
        return np.random.default_rng(seed_or_rng)
    raise TypeError(
        "expected an int seed, numpy Generator or SeedSequence, got "
        f"{type(seed_or_rng).__name__}"
    )


def check_quaternions(x, *, name: str = "X") -> np.ndarray:
    """Validate an array of quaternions with shape (..., 4).

    Returns a float64 copy. Rows must be finite and have nonzero norm;
    normalization itself is left to the caller.
    """
    q = np.asarray(x, dtype=float)
    if q.ndim == 0 or q.shape[-1] != 4:
        raise ValueError(
            f"{name} must have shape (..., 4) for quaternions (w, x, y, z), "
            f"got {q.shape}"
        )
    if not np.all(np.isfinite(q)):
        bad = np.argwhere(~np.isfinite(q).all(axis=-1))
        raise ValueError(f"{name} contains non-finite quaternion at index {bad[0]}")
    norms = np.linalg.norm(q, axis=-1)
    if np.any(norms < 1e-12):
        bad = np.argwhere(norms < 1e-12)
        raise ValueError(f"{name} contains a zero-norm quaternion at index {bad[0]}")
    return q.copy()


def check_positive(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a nonnegative finite number, got {value!r}")
    return float(value)
