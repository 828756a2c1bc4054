"""Legendre polynomials, Wigner d-matrices, irreducible matrices and transforms.

Index conventions. The degree-delta irreducible unitary matrix has dimension
2*delta + 1 and is stored with row index a and column index b running in
ascending order -delta, ..., delta. In z-y-z Euler angles

    U^delta(phi, theta, psi)[a, b] = exp(-i a phi) d^delta[a, b](theta) exp(-i b psi)

where d^delta is the real Wigner d-matrix. Its central entry d^delta[0, 0]
equals the Legendre polynomial P_delta(cos theta); that identity is what ties
zonal laws to their scalar Legendre coefficients.

Legendre coefficients of a zonal middle-angle density p are taken against the
reference measure sin(theta) dtheta / 2:

    a_delta = integral_0^pi p(theta) P_delta(cos theta) sin(theta) / 2 dtheta.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad_vec

__all__ = [
    "legendre_p",
    "legendre_all",
    "character",
    "laplace_eigenvalue",
    "gauss_legendre_theta",
    "wigner_d",
    "iter_wigner_d",
    "irrep_matrix",
    "legendre_coeff",
    "legendre_spectrum",
    "legendre_series",
    "plancherel_norm_sq",
    "fourier_coefficient",
]


def legendre_p(delta: int, x) -> np.ndarray:
    """Legendre polynomial P_delta evaluated by the Bonnet recursion.

    Arguments farther than 1e-12 outside [-1, 1] are rejected; round-off
    excursions inside that band are clipped.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("legendre_p argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    if delta == 0:
        return np.ones_like(x)
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(2, delta + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    return p


def legendre_all(lmax: int, x) -> np.ndarray:
    """All P_0(x), ..., P_lmax(x) stacked on a new leading axis."""
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("legendre_all argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for j in range(2, lmax + 1):
        out[j] = ((2 * j - 1) * x * out[j - 1] - (j - 1) * out[j - 2]) / j
    return out


def character(delta: int, omega) -> np.ndarray:
    """Character of the degree-delta representation at rotation angle omega."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    omega = np.asarray(omega, dtype=float)
    small = np.abs(omega) < 1e-7
    safe = np.where(small, 1.0, omega)
    val = np.sin((delta + 0.5) * safe) / np.sin(0.5 * safe)
    return np.where(small, float(2 * delta + 1), val)


def laplace_eigenvalue(delta: int) -> float:
    """Eigenvalue delta * (delta + 1) of the Laplacian on degree delta."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return float(delta * (delta + 1))


def gauss_legendre_theta(n: int):
    """Nodes and weights integrating f(theta) sin(theta)/2 dtheta over [0, pi].

    Exact whenever f(theta) is a polynomial in cos(theta) of degree < 2n.
    """
    if n < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(n)
    return np.arccos(x), 0.5 * w


def iter_wigner_d(lmax: int, theta):
    """Yield (delta, d^delta(theta)) for delta = 0..lmax.

    theta may be a scalar or a 1-dim array; each yielded matrix has shape
    (2*delta+1, 2*delta+1) or (n, 2*delta+1, 2*delta+1). Matrices are built
    by a three-term recursion in the degree for interior entries, with the
    border row/column |a| = delta or |b| = delta seeded from the closed
    product form in half-angle sines and cosines.
    """
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    scalar = np.ndim(theta) == 0
    if t.ndim != 1:
        raise ValueError("theta must be scalar or 1-dim")
    n = t.shape[0]
    x = np.cos(t)
    c2, s2 = np.cos(0.5 * t), np.sin(0.5 * t)

    dim = 2 * lmax + 1
    mid = lmax
    prev = np.zeros((n, dim, dim))
    prev[:, mid, mid] = 1.0
    yield 0, (np.ones((1, 1)) if scalar else np.ones((n, 1, 1)))
    if lmax == 0:
        return

    # Powers of cos(theta/2) and sin(theta/2) up to 2*lmax, shape (n, 2*lmax+1).
    ks = np.arange(2 * lmax + 1)
    pc = c2[:, None] ** ks
    ps = s2[:, None] ** ks

    prev2 = np.zeros_like(prev)
    for j in range(1, lmax + 1):
        cur = np.zeros((n, dim, dim))
        a = np.arange(-j, j + 1)
        if j == 1:
            cur[:, mid, mid] = x
        else:
            ai = a[1:-1]  # interior indices |a| <= j-1
            af = ai.astype(float)
            num2 = np.sqrt(
                ((j - 1.0) ** 2 - af[:, None] ** 2) * ((j - 1.0) ** 2 - af[None, :] ** 2)
            )
            den = (j - 1.0) * np.sqrt(
                (j * j - af[:, None] ** 2) * (j * j - af[None, :] ** 2)
            )
            lin = (2 * j - 1.0) * (
                (j - 1.0) * j * x[:, None, None] - af[:, None] * af[None, :]
            )
            sl = slice(mid - (j - 1), mid + j)
            cur[:, sl, sl] = (
                lin * prev[:, sl, sl] - j * num2 * prev2[:, sl, sl]
            ) / den
        # Border rows and columns from the closed form.
        binom = np.array([math.comb(2 * j, j + k) for k in a], dtype=float)
        root = np.sqrt(binom)
        sgn = np.where((j - a) % 2 == 0, 1.0, -1.0)
        sl = slice(mid - j, mid + j + 1)
        cur[:, mid + j, sl] = root * pc[:, j + a] * ps[:, j - a] * sgn
        cur[:, mid - j, sl] = root * pc[:, j - a] * ps[:, j + a]
        cur[:, sl, mid + j] = root * pc[:, j + a] * ps[:, j - a]
        cur[:, sl, mid - j] = root * pc[:, j - a] * ps[:, j + a] * np.where(
            (j + a) % 2 == 0, 1.0, -1.0
        )
        block = cur[:, sl, sl]
        yield j, (block[0].copy() if scalar else block.copy())
        prev2, prev = prev, cur


def wigner_d(delta: int, theta) -> np.ndarray:
    """Wigner d-matrix of degree delta at angle(s) theta."""
    for j, d in iter_wigner_d(delta, theta):
        if j == delta:
            return d
    raise AssertionError("unreachable")


def irrep_matrix(delta: int, rotation) -> np.ndarray:
    """Irreducible unitary matrix U^delta(g), shape (..., 2*delta+1, 2*delta+1)."""
    euler = rotation.to_euler_zyz()
    phi, theta, psi = euler[..., 0], euler[..., 1], euler[..., 2]
    flat_theta = np.atleast_1d(theta).ravel()
    d = wigner_d(delta, flat_theta)
    d = d.reshape(np.shape(theta) + d.shape[-2:])
    a = np.arange(-delta, delta + 1)
    left = np.exp(-1j * np.multiply.outer(phi, a))
    right = np.exp(-1j * np.multiply.outer(psi, a))
    return left[..., :, None] * d * right[..., None, :]


def legendre_coeff(density, delta: int, epsabs: float = 1e-11) -> float:
    """Legendre coefficient of a zonal middle-angle density at one degree."""
    return float(legendre_spectrum(density, delta, epsabs=epsabs)[delta])


def legendre_spectrum(density, lmax: int, epsabs: float = 1e-11) -> np.ndarray:
    """Legendre coefficients a_0..a_lmax of a middle-angle density.

    Uses adaptive vector quadrature; sharply peaked densities, for instance
    strongly forward scattering phase functions, are handled without a fixed
    global grid.
    """
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")

    def integrand(t):
        tt = np.asarray(t, dtype=float)
        f = np.asarray(density(tt), dtype=float)
        return 0.5 * f * np.sin(tt) * legendre_all(lmax, np.cos(tt))

    val, _ = quad_vec(integrand, 0.0, np.pi, epsabs=epsabs, epsrel=1e-10, limit=400)
    return val


def legendre_series(coeffs, theta) -> np.ndarray:
    """Evaluate sum_delta (2*delta+1) a_delta P_delta(cos theta)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1:
        raise ValueError("coeffs must be 1-dim, indexed by degree")
    theta = np.asarray(theta, dtype=float)
    p = legendre_all(coeffs.shape[0] - 1, np.cos(theta))
    weights = 2.0 * np.arange(coeffs.shape[0]) + 1.0
    return np.tensordot(weights * coeffs, p, axes=(0, 0))


def plancherel_norm_sq(coeffs) -> float:
    """Squared norm sum_delta (2*delta+1) a_delta^2 of a zonal spectrum."""
    coeffs = np.asarray(coeffs, dtype=float)
    weights = 2.0 * np.arange(coeffs.shape[0]) + 1.0
    return float(np.sum(weights * coeffs**2))


def fourier_coefficient(fn, delta: int, n_theta: int | None = None,
                        n_azimuth: int | None = None) -> np.ndarray:
    """Matrix Fourier coefficient integral f(g) U^delta(g)^dagger dg.

    `fn` maps a Rotation batch to real or complex values. Quadrature is a
    tensor product: Gauss-Legendre in theta and trapezoid in the periodic
    angles, so the result is exact for integrands of bounded trigonometric
    degree. Defaults resolve smooth densities of degree up to about
    2 * delta in each angle.
    """
    from .rotations import Rotation

    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if n_theta is None:
        n_theta = max(32, 4 * (delta + 1))
    if n_azimuth is None:
        n_azimuth = 4 * delta + 8
    theta, wt = gauss_legendre_theta(n_theta)
    az = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    grid = np.stack(np.meshgrid(az, theta, az, indexing="ij"), axis=-1)
    values = np.asarray(fn(Rotation.from_euler_zyz(grid)))
    values = values.reshape(n_azimuth, n_theta, n_azimuth)

    a = np.arange(-delta, delta + 1)
    # (U^dagger)[a, b] = exp(i b phi) d[b, a](theta) exp(i a psi)
    eb = np.exp(1j * np.outer(a, az)) / n_azimuth  # (b, phi)
    ea = np.exp(1j * np.outer(a, az)) / n_azimuth  # (a, psi)
    d = wigner_d(delta, theta)  # (theta, b, a) once transposed below
    g = np.einsum("bp,ptq->btq", eb, values.astype(complex))
    h = np.einsum("btq,aq->bta", g, ea)
    return np.einsum("t,tba,bta->ab", wt, d, h)
