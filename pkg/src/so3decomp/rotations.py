"""Rotations of 3-space stored as unit quaternions, plus Haar and zonal sampling.

A rotation is kept as a unit quaternion (w, x, y, z) with w >= 0, which picks
one representative of the pair {q, -q}. All operations are vectorized over an
arbitrary leading batch shape.

Euler angles follow the z-y-z convention: R = Rz(phi) Ry(theta) Rz(psi) with
phi, psi in [0, 2*pi) and theta in [0, pi]. The middle angle theta is the one
that matters for zonal (conjugation-averaged-about-z) laws: its cosine equals
the (3,3) entry of the rotation matrix.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .validation import check_quaternions, check_rng

__all__ = [
    "Rotation",
    "sample_haar",
    "sample_zonal",
    "ZonalAngleSampler",
]


def _normalized(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    # Canonical sign: nonnegative scalar part.
    return np.where(q[..., :1] < 0.0, -q, q)


def _hamilton(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of raw quaternion arrays, no normalization."""
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


class Rotation:
    """A batch of rotations backed by unit quaternions of shape (..., 4)."""

    __slots__ = ("_q",)

    def __init__(self, quaternions):
        q = check_quaternions(quaternions, name="quaternions")
        self._q = _normalized(q)
        self._q.setflags(write=False)

    @classmethod
    def _wrap(cls, q: np.ndarray) -> "Rotation":
        # Fast path for internally produced, already-normalized data.
        obj = object.__new__(cls)
        q = np.where(q[..., :1] < 0.0, -q, q)
        q.setflags(write=False)
        obj._q = q
        return obj

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, shape=()) -> "Rotation":
        q = np.zeros(tuple(np.atleast_1d(shape)) + (4,) if shape != () else (4,))
        q[..., 0] = 1.0
        return cls._wrap(q)

    @classmethod
    def from_axis_angle(cls, axis, angle) -> "Rotation":
        """Rotation by `angle` about `axis` (need not be normalized)."""
        axis = np.asarray(axis, dtype=float)
        angle = np.asarray(angle, dtype=float)
        norms = np.linalg.norm(axis, axis=-1, keepdims=True)
        if np.any(norms < 1e-12):
            raise ValueError("rotation axis must have nonzero norm")
        u = axis / norms
        half = 0.5 * angle
        q = np.empty(np.broadcast_shapes(angle.shape, axis.shape[:-1]) + (4,))
        q[..., 0] = np.cos(half)
        q[..., 1:] = np.sin(half)[..., None] * u
        return cls._wrap(_normalized(q))

    @classmethod
    def from_euler_zyz(cls, angles) -> "Rotation":
        """Build rotations from stacked (phi, theta, psi) angles, shape (..., 3)."""
        ang = np.asarray(angles, dtype=float)
        if ang.shape[-1] != 3:
            raise ValueError(f"expected (..., 3) Euler angles, got {ang.shape}")
        phi, theta, psi = ang[..., 0], ang[..., 1], ang[..., 2]
        ch, sh = np.cos(0.5 * theta), np.sin(0.5 * theta)
        sm, df = 0.5 * (phi + psi), 0.5 * (phi - psi)
        q = np.stack(
            [
                ch * np.cos(sm),
                -sh * np.sin(df),
                sh * np.cos(df),
                ch * np.sin(sm),
            ],
            axis=-1,
        )
        return cls._wrap(_normalized(q))

    @classmethod
    def about_z(cls, angle) -> "Rotation":
        angle = np.asarray(angle, dtype=float)
        zeros = np.zeros_like(angle)
        return cls.from_euler_zyz(np.stack([angle, zeros, zeros], axis=-1))

    @classmethod
    def about_y(cls, angle) -> "Rotation":
        angle = np.asarray(angle, dtype=float)
        zeros = np.zeros_like(angle)
        return cls.from_euler_zyz(np.stack([zeros, angle, zeros], axis=-1))

    # -- basic properties ----------------------------------------------------

    @property
    def quaternions(self) -> np.ndarray:
        """The underlying unit quaternions, read-only, shape (..., 4)."""
        return self._q

    @property
    def shape(self):
        return self._q.shape[:-1]

    def __len__(self) -> int:
        if self._q.ndim == 1:
            raise TypeError("scalar Rotation has no length")
        return self._q.shape[0]

    def __getitem__(self, idx) -> "Rotation":
        return Rotation._wrap(self._q[idx])

    def __repr__(self) -> str:
        return f"Rotation(shape={self.shape})"

    def reshape(self, shape) -> "Rotation":
        return Rotation._wrap(self._q.reshape(tuple(np.atleast_1d(shape)) + (4,)))

    # -- group operations ----------------------------------------------------

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product; self applied after other as maps of R^3."""
        return Rotation._wrap(_normalized(_hamilton(self._q, other._q)))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        q = self._q * np.array([1.0, -1.0, -1.0, -1.0])
        return Rotation._wrap(q)

    def angle(self) -> np.ndarray:
        """Rotation angle in [0, pi]."""
        return 2.0 * np.arccos(np.clip(np.abs(self._q[..., 0]), -1.0, 1.0))

    def z_axis_cosine(self) -> np.ndarray:
        """Cosine of the Euler middle angle, the (3,3) matrix entry."""
        w, x, y, z = np.moveaxis(self._q, -1, 0)
        return np.clip(w * w + z * z - x * x - y * y, -1.0, 1.0)

    def as_matrix(self) -> np.ndarray:
        """Rotation matrices, shape (..., 3, 3)."""
        w, x, y, z = np.moveaxis(self._q, -1, 0)
        m = np.empty(self.shape + (3, 3))
        m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
        m[..., 0, 1] = 2.0 * (x * y - w * z)
        m[..., 0, 2] = 2.0 * (x * z + w * y)
        m[..., 1, 0] = 2.0 * (x * y + w * z)
        m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
        m[..., 1, 2] = 2.0 * (y * z - w * x)
        m[..., 2, 0] = 2.0 * (x * z - w * y)
        m[..., 2, 1] = 2.0 * (y * z + w * x)
        m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
        return m

    def to_euler_zyz(self) -> np.ndarray:
        """Euler angles (phi, theta, psi), shape (..., 3).

        Away from the degenerate axes theta is recovered through atan2 of the
        (3,3) entry against the norm of the (1,3), (2,3) pair, which stays well
        conditioned near theta = 0 and pi. At the degeneracies only phi + psi
        (resp. phi - psi) is defined and psi is set to zero.
        """
        w, x, y, z = np.moveaxis(self._q, -1, 0)
        r02 = 2.0 * (x * z + w * y)
        r12 = 2.0 * (y * z - w * x)
        r20 = 2.0 * (x * z - w * y)
        r21 = 2.0 * (y * z + w * x)
        r22 = 1.0 - 2.0 * (x * x + y * y)
        st = np.hypot(r02, r12)
        theta = np.arctan2(st, r22)

        phi = np.mod(np.arctan2(r12, r02), 2.0 * np.pi)
        psi = np.mod(np.arctan2(r21, -r20), 2.0 * np.pi)

        r00 = 1.0 - 2.0 * (y * y + z * z)
        r01 = 2.0 * (x * y - w * z)
        r10 = 2.0 * (x * y + w * z)
        low = theta < 1e-9
        high = theta > np.pi - 1e-9
        if np.any(low) or np.any(high):
            phi_low = np.mod(np.arctan2(r10, r00), 2.0 * np.pi)
            phi_high = np.mod(np.arctan2(-r01, -r00), 2.0 * np.pi)
            phi = np.where(low, phi_low, np.where(high, phi_high, phi))
            psi = np.where(low | high, 0.0, psi)
        return np.stack([phi, theta, psi], axis=-1)


def sample_haar(rng, size=None) -> Rotation:
    """Draw Haar-distributed rotations: normalized 4-dim standard Gaussians."""
    rng = check_rng(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    g = rng.standard_normal(shape + (4,))
    norms = np.linalg.norm(g, axis=-1)
    while np.any(norms < 1e-12):  # pragma: no cover, probability ~ 0
        bad = norms < 1e-12
        g[bad] = rng.standard_normal((int(bad.sum()), 4))
        norms = np.linalg.norm(g, axis=-1)
    return Rotation(g)


class ZonalAngleSampler:
    """Inverse-CDF sampler for the Euler middle angle of a zonal law.

    Parameters
    ----------
    density : callable
        Density p(theta) of the middle angle with respect to the reference
        measure sin(theta) dtheta / 2 on [0, pi]. Must accept ndarray input.
    grid_size : int
        Number of points in the tabulated cumulative, default 4096.

    The density is checked for normalization with adaptive quadrature at
    construction and rejected if it integrates farther than 1e-6 from one,
    or dips below -1e-9 on the grid.
    """

    def __init__(self, density, grid_size: int = 4096):
        if grid_size < 16:
            raise ValueError("grid_size must be at least 16")
        self.density = density
        self.grid_size = int(grid_size)
        total, _ = quad(
            lambda t: 0.5 * float(density(np.asarray(t))) * np.sin(t),
            0.0,
            np.pi,
            limit=200,
        )
        if abs(total - 1.0) > 1e-6:
            raise ValueError(
                f"density integrates to {total!r} against sin(theta) dtheta / 2, "
                "expected 1 within 1e-6"
            )
        self._theta = np.linspace(0.0, np.pi, self.grid_size)
        f = np.asarray(density(self._theta), dtype=float)
        if np.min(f) < -1e-9:
            raise ValueError("density is negative on the sampling grid")
        weights = 0.5 * np.clip(f, 0.0, None) * np.sin(self._theta)
        cdf = np.concatenate(
            [[0.0], np.cumsum(0.5 * (weights[1:] + weights[:-1]) * np.diff(self._theta))]
        )
        self._cdf = cdf / cdf[-1]

    def __call__(self, theta):
        return self.density(theta)

    def sample_theta(self, rng, size=None) -> np.ndarray:
        rng = check_rng(rng)
        u = rng.random(size)
        return np.interp(u, self._cdf, self._theta)


def _sample_middle_angle(theta_density, rng, size):
    if hasattr(theta_density, "sample_cos"):
        c = np.clip(theta_density.sample_cos(rng, size), -1.0, 1.0)
        return np.arccos(c)
    if isinstance(theta_density, ZonalAngleSampler):
        return theta_density.sample_theta(rng, size)
    if callable(theta_density):
        return ZonalAngleSampler(theta_density).sample_theta(rng, size)
    raise TypeError(
        "theta_density must be callable or provide sample_cos / sample_theta"
    )


def sample_zonal(theta_density, rng, size=None) -> Rotation:
    """Draw from the zonal law with the given middle-angle density.

    The outer angles phi, psi are independent and uniform on [0, 2*pi); the
    middle angle comes from `theta_density`. Densities exposing a `sample_cos`
    method (exact inverse CDF, e.g. Henyey-Greenstein) are used directly,
    otherwise a tabulated ZonalAngleSampler is built. Draw order is phi,
    theta, psi so that results are reproducible for a given generator state.
    """
    rng = check_rng(rng)
    phi = rng.uniform(0.0, 2.0 * np.pi, size)
    theta = _sample_middle_angle(theta_density, rng, size)
    psi = rng.uniform(0.0, 2.0 * np.pi, size)
    return Rotation.from_euler_zyz(np.stack([phi, theta, psi], axis=-1))
