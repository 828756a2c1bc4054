"""Henyey-Greenstein phase function and multiple-scattering observables.

The Henyey-Greenstein density with anisotropy g, taken against the reference
measure sin(theta) dtheta / 2, is

    p_g(theta) = (1 - g^2) / (1 + g^2 - 2 g cos(theta))^{3/2},

whose Legendre coefficients are exactly g^delta. A beam traversing a slab of
depth H with mean free path ell accumulates a Poisson(H / ell) number of such
deflections, so the exit deflection follows the compound mixture handled
here: an atom exp(-H / ell) of never-scattered photons at angle zero plus a
continuous part sum_n P(N = n) p_{g^n}.
"""

from __future__ import annotations

import math

import numpy as np

from .validation import check_positive, check_rng

__all__ = [
    "HenyeyGreenstein",
    "hg_density",
    "hg_cdf",
    "transmitted_intensity",
    "mixture_density",
    "mixture_cdf",
    "estimate_g",
]


def _check_g(g: float) -> float:
    g = float(g)
    if not np.isfinite(g) or abs(g) >= 1.0:
        raise ValueError(f"anisotropy g must satisfy |g| < 1, got {g!r}")
    return g


class HenyeyGreenstein:
    """Henyey-Greenstein deflection law with mean cosine g."""

    def __init__(self, g: float):
        self.g = _check_g(g)

    def __repr__(self) -> str:
        return f"HenyeyGreenstein(g={self.g!r})"

    def __call__(self, theta) -> np.ndarray:
        return hg_density(self.g, theta)

    def sample_cos(self, rng, size=None) -> np.ndarray:
        """Exact inverse-CDF draw of cos(theta)."""
        rng = check_rng(rng)
        u = rng.random(size)
        g = self.g
        if abs(g) < 1e-8:
            return 1.0 - 2.0 * u
        sqr = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
        return np.clip((1.0 + g * g - sqr * sqr) / (2.0 * g), -1.0, 1.0)

    def legendre_spectrum(self, lmax: int) -> np.ndarray:
        """Legendre coefficients g^0, g^1, ..., g^lmax."""
        return self.g ** np.arange(lmax + 1, dtype=float)

    def tail_norm_sq(self, cutoff: int) -> float:
        """Plancherel mass sum_{delta >= cutoff} (2 delta + 1) g^(2 delta)."""
        if cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        x = self.g * self.g
        if x == 0.0:
            return 1.0 if cutoff == 0 else 0.0
        head = x**cutoff
        return float(
            2.0 * head * (cutoff - (cutoff - 1.0) * x) / (1.0 - x) ** 2
            + head / (1.0 - x)
        )


def hg_density(g: float, theta) -> np.ndarray:
    g = _check_g(g)
    c = np.cos(np.asarray(theta, dtype=float))
    return (1.0 - g * g) / (1.0 + g * g - 2.0 * g * c) ** 1.5


def hg_cdf(g: float, theta) -> np.ndarray:
    """CDF of the Henyey-Greenstein deflection angle on [0, pi]."""
    g = _check_g(g)
    theta = np.asarray(theta, dtype=float)
    c = np.cos(np.clip(theta, 0.0, np.pi))
    if abs(g) < 1e-8:
        return 0.5 * (1.0 - c)
    val = (1.0 - g * g) / (2.0 * g) * (
        1.0 / (1.0 - g) - 1.0 / np.sqrt(1.0 + g * g - 2.0 * g * c)
    )
    return np.clip(val, 0.0, 1.0)


def _poisson_weights(mean: float, tail: float = 1e-12, cap: int = 100000):
    """Probabilities P(N = 0..nmax) with tail mass below `tail`."""
    weights = [math.exp(-mean)]
    total = weights[0]
    n = 0
    while 1.0 - total > tail and n < cap:
        n += 1
        weights.append(weights[-1] * mean / n)
        total += weights[-1]
    return np.array(weights)


def transmitted_intensity(g: float, depth: float, mfp: float, theta,
                          dmax: int | None = None) -> np.ndarray:
    """Cumulative angular intensity C_H(theta) behind a slab.

    Evaluates the Legendre series of the compound law in cumulative form. The
    unscattered atom exp(-depth / mfp) is split off in closed form and only
    the excess coefficients exp(tau (g^delta - 1)) - exp(-tau) are summed,
    so the truncation error is a geometric tail instead of an oscillating
    remainder near theta = 0. C_H(0) = 0 and C_H(pi) = 1 exactly.
    """
    g = _check_g(g)
    depth = check_positive("depth", depth)
    mfp = check_positive("mfp", mfp)
    tau = depth / mfp
    theta = np.asarray(theta, dtype=float)
    atom = math.exp(-tau)
    if dmax is None:
        if abs(g) < 1e-14:
            dmax = 1
        else:
            # residual coefficients fall off like tau * exp(-tau) * g^delta
            target = 1e-15 / max(tau * atom, 1e-300)
            dmax = int(min(200000, max(8, math.ceil(math.log(target) / math.log(abs(g))))))
    c = np.cos(theta)
    # J_delta(theta) = (1/2) int_0^theta P_delta(cos t) sin t dt
    p_prev = np.ones_like(c)  # P_0
    p = c.copy()  # P_1
    out = np.full(theta.shape, atom) + atom * math.expm1(tau) * 0.5 * (1.0 - c)
    for delta in range(1, dmax + 1):
        r = atom * math.expm1(tau * g**delta)
        if r == 0.0:
            break
        p_next = ((2 * delta + 1) * c * p - delta * p_prev) / (delta + 1)
        out += 0.5 * r * (p_prev - p_next)
        p_prev, p = p, p_next
    out = np.where(theta > 0.0, out, 0.0)
    return np.clip(out, 0.0, 1.0)


def mixture_density(g: float, mean: float, theta, tail: float = 1e-12):
    """Continuous part of the exit-angle density plus the unscattered atom.

    Returns (values, atom): `values` is sum_{n >= 1} P(N = n) p_{g^n}(theta)
    against sin(theta) dtheta / 2, and `atom` = P(N = 0) is the point mass at
    zero. The continuous part integrates to 1 - atom up to the Poisson tail
    cut below `tail`.
    """
    g = _check_g(g)
    weights = _poisson_weights(mean, tail)
    theta = np.asarray(theta, dtype=float)
    values = np.zeros(theta.shape)
    for n in range(1, weights.shape[0]):
        values += weights[n] * hg_density(g**n, theta)
    return values, float(weights[0])


def mixture_cdf(g: float, mean: float, theta, tail: float = 1e-12) -> np.ndarray:
    """CDF of the exit deflection angle, atom at zero included."""
    g = _check_g(g)
    weights = _poisson_weights(mean, tail)
    theta = np.asarray(theta, dtype=float)
    out = np.where(theta >= 0.0, weights[0], 0.0).astype(float)
    for n in range(1, weights.shape[0]):
        out = out + weights[n] * hg_cdf(g**n, theta)
    return out


def estimate_g(coefficients, gate_passed=None) -> np.ndarray:
    """Per-degree anisotropy readings g_delta = a_delta^(1/delta).

    Degree zero carries no information and yields nan, as do degrees whose
    coefficient is nonpositive or gated out.
    """
    a = np.asarray(coefficients, dtype=float)
    if a.ndim != 1:
        raise ValueError("coefficients must be 1-dim, indexed by degree")
    delta = np.arange(a.shape[0], dtype=float)
    ok = (delta >= 1) & (a > 0.0)
    if gate_passed is not None:
        ok &= np.asarray(gate_passed, dtype=bool)
    out = np.full(a.shape, np.nan)
    out[ok] = a[ok] ** (1.0 / delta[ok])
    return out
