"""Shared numerical helpers for the test suite."""

import numpy as np
from scipy.linalg import expm


def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov statistic against a callable CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    hi = np.abs(np.arange(1, n + 1) / n - f)
    lo = np.abs(np.arange(n) / n - f)
    return float(max(hi.max(), lo.max()))


def ks_two_sample(a, b):
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    grid.sort(kind="mergesort")
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def angular_momentum_y(delta):
    """J_y in the ascending m = -delta..delta basis, from ladder operators."""
    m = np.arange(-delta, delta + 1, dtype=float)
    up = np.sqrt(delta * (delta + 1.0) - m[:-1] * (m[:-1] + 1.0))
    jp = np.zeros((2 * delta + 1, 2 * delta + 1))
    jp[np.arange(1, 2 * delta + 1), np.arange(2 * delta)] = up
    return (jp - jp.T) / 2j


def wigner_d_reference(delta, theta):
    """Reference middle-angle block expm(-i theta J_y); real up to roundoff."""
    block = expm(-1j * float(theta) * angular_momentum_y(delta))
    assert np.abs(block.imag).max() < 1e-12
    return block.real
