"""Compound Poisson rotation processes, rotational heat noise, and simulation.

The observable is Z = M . Y(T): a compound Poisson product Y(T) of i.i.d.
zonal jumps accumulated left to right over [0, T], composed with an
independent heat-kernel blur M of variance sigma2. Its zonal spectrum
factorizes degree by degree,

    b_delta = exp(rate * T * (a_delta - 1)) * exp(-delta (delta+1) sigma2 / 2),

which is what `theoretical_spectrum` returns and what decompounding inverts.

`simulate_interlaced` builds the same law path-wise: Brownian increments
between consecutive jump times, with an optional cap on the sub-interval
length. Since the heat increments are sampled from their exact law, the cap
only subdivides intervals and never changes the distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import harmonic
from .rotations import Rotation, ZonalAngleSampler, _hamilton, _normalized, sample_zonal
from .validation import check_nonnegative, check_positive, check_rng

__all__ = [
    "sample_poisson",
    "CompoundModel",
    "simulate_compound",
    "heat_spectrum",
    "sample_heat_kernel",
    "simulate_noisy_observation",
    "simulate_interlaced",
    "theoretical_spectrum",
    "ObservationSet",
    "simulate_observations",
]

# Knuth multiplication stays in a numerically safe regime for means up to 30;
# larger means are split into independent parts of at most that size.
_KNUTH_MAX_MEAN = 30.0


def _knuth(rng: np.random.Generator, mean: float, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    if mean == 0.0 or n == 0:
        return out
    floor = math.exp(-mean)
    p = rng.random(n)
    idx = np.nonzero(p > floor)[0]
    while idx.size:
        out[idx] += 1
        p[idx] *= rng.random(idx.size)
        idx = idx[p[idx] > floor]
    return out


def sample_poisson(rng, mean: float, size=None) -> np.ndarray:
    """Poisson counts via Knuth's product-of-uniforms method.

    Means above 30 are split into equal parts of at most 30 and the
    independent part counts are summed, which leaves the law exact.
    """
    rng = check_rng(rng)
    mean = check_nonnegative("mean", mean)
    shape = () if size is None else tuple(np.atleast_1d(size))
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    parts = max(1, math.ceil(mean / _KNUTH_MAX_MEAN))
    total = np.zeros(n, dtype=np.int64)
    for _ in range(parts):
        total += _knuth(rng, mean / parts, n)
    if size is None:
        return total[0]
    return total.reshape(shape)


@dataclass
class CompoundModel:
    """Parameters of the noisy compound Poisson rotation process.

    Parameters
    ----------
    rate : float
        Jump intensity, per unit time.
    horizon : float
        Accumulation time T.
    jump_law : object
        The zonal jump distribution, given through its middle-angle density.
        Either a callable density p(theta) against sin(theta) dtheta / 2
        (normalization is checked at construction), an object that also
        provides `sample_cos` for exact sampling (e.g. HenyeyGreenstein),
        or any object with a `sample_rotations(rng, size)` method.
    noise_variance : float
        Heat-kernel blur variance sigma2 applied on top of Y(T).
    """

    rate: float
    horizon: float
    jump_law: object
    noise_variance: float = 0.0
    _sampler: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rate = check_positive("rate", self.rate)
        # T = 0 is the empty-product limit, still a valid model
        self.horizon = check_nonnegative("horizon", self.horizon)
        self.noise_variance = check_nonnegative("noise_variance", self.noise_variance)
        law = self.jump_law
        if hasattr(law, "sample_rotations") or hasattr(law, "sample_cos"):
            self._sampler = law
        elif isinstance(law, ZonalAngleSampler):
            self._sampler = law
        elif callable(law):
            self._sampler = ZonalAngleSampler(law)
        else:
            raise TypeError(
                "jump_law must be a callable middle-angle density or provide "
                "sample_cos / sample_rotations"
            )

    @property
    def jump_mean(self) -> float:
        """Expected number of jumps rate * horizon."""
        return self.rate * self.horizon

    def sample_jumps(self, rng, size=None) -> Rotation:
        rng = check_rng(rng)
        if hasattr(self._sampler, "sample_rotations"):
            return self._sampler.sample_rotations(rng, size)
        return sample_zonal(self._sampler, rng, size)

    def jump_spectrum(self, lmax: int) -> np.ndarray:
        """Legendre coefficients a_0..a_lmax of the jump middle-angle law."""
        law = self.jump_law
        if hasattr(law, "legendre_spectrum"):
            return np.asarray(law.legendre_spectrum(lmax), dtype=float)
        if callable(law):
            return harmonic.legendre_spectrum(law, lmax)
        raise TypeError("jump_law does not expose a density or a spectrum")


def _compose_counted(base_q: np.ndarray, counts: np.ndarray,
                     factors_q: np.ndarray) -> np.ndarray:
    """Right-multiply row i of base_q by its counts[i] factors, in order."""
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    q = base_q.copy()
    k = 0
    while True:
        idx = np.nonzero(counts > k)[0]
        if idx.size == 0:
            break
        q[idx] = _hamilton(q[idx], factors_q[offsets[idx] + k])
        k += 1
    return q


def simulate_compound(model: CompoundModel, rng, size=None, return_counts=False):
    """Draw Y(T): a Poisson number of i.i.d. jumps composed left to right."""
    rng = check_rng(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    counts = sample_poisson(rng, model.jump_mean, size=n)
    jumps = model.sample_jumps(rng, size=int(counts.sum()))
    base = np.zeros((n, 4))
    base[:, 0] = 1.0
    q = _compose_counted(base, counts, np.atleast_2d(jumps.quaternions))
    q = _normalized(q)
    out = Rotation._wrap(q[0] if size is None else q.reshape(shape + (4,)))
    if return_counts:
        return out, (int(counts[0]) if size is None else counts.reshape(shape))
    return out


def heat_spectrum(sigma2: float, lmax: int) -> np.ndarray:
    """Zonal spectrum exp(-delta (delta+1) sigma2 / 2) of the heat kernel."""
    sigma2 = check_nonnegative("sigma2", sigma2)
    delta = np.arange(lmax + 1, dtype=float)
    return np.exp(-0.5 * delta * (delta + 1.0) * sigma2)


def _heat_series_density(omega: np.ndarray, sigma2, dmax: int) -> np.ndarray:
    """Character-series form of the angle density, rows broadcast over omega."""
    s = np.asarray(sigma2, dtype=float)[..., None]
    out = np.zeros(np.broadcast_shapes(s.shape, omega.shape))
    half = 0.5 * omega
    for delta in range(dmax + 1):
        weight = (2 * delta + 1) * np.exp(-0.5 * delta * (delta + 1) * s)
        if np.all(weight < 1e-18):
            break
        out += weight * 2.0 * np.sin((delta + 0.5) * omega) * np.sin(half)
    return out / np.pi


def _heat_image_density(omega: np.ndarray, sigma2) -> np.ndarray:
    """Gaussian-image form of the angle density, accurate for small variance."""
    s = np.asarray(sigma2, dtype=float)[..., None]
    total = np.zeros(np.broadcast_shapes(s.shape, omega.shape))
    for k in range(-3, 4):
        shifted = omega + 2.0 * np.pi * k
        total += (-1.0) ** k * shifted * np.exp(-0.5 * shifted**2 / s)
    amp = np.exp(0.125 * s) * math.sqrt(2.0 * math.pi) * s**-1.5
    return amp * total * 2.0 * np.sin(0.5 * omega) / np.pi


def _heat_angle_density(omega: np.ndarray, sigma2: float, dmax: int) -> np.ndarray:
    """Density of the rotation angle of the heat kernel, against domega."""
    if sigma2 >= 1.0:
        return _heat_series_density(omega[None, :], np.array([sigma2]), dmax)[0]
    return _heat_image_density(omega[None, :], np.array([sigma2]))[0]


def _angle_support(sigma2: np.ndarray) -> np.ndarray:
    """Upper grid limit for the angle density: 14 standard deviations or pi."""
    return np.minimum(np.pi, 14.0 * np.sqrt(sigma2))


def _random_axes(rng: np.random.Generator, shape) -> np.ndarray:
    axes = rng.standard_normal(tuple(shape) + (3,))
    norms = np.linalg.norm(axes, axis=-1)
    while np.any(norms < 1e-12):  # pragma: no cover, probability ~ 0
        bad = norms < 1e-12
        axes[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(axes, axis=-1)
    return axes / norms[..., None]


def sample_heat_kernel(rng, sigma2: float, size=None, dmax: int = 64,
                       grid_size: int = 4096) -> Rotation:
    """Draw rotations from the heat kernel at variance sigma2.

    The rotation angle is sampled by inverting a tabulated CDF of its exact
    density; the axis is uniform on the sphere, drawn after the angles. At
    sigma2 = 0 the identity is returned without consuming the generator.
    An error is raised if the truncated series goes noticeably negative,
    in which case dmax should be raised.
    """
    rng = check_rng(rng)
    sigma2 = check_nonnegative("sigma2", sigma2)
    if sigma2 == 0.0:
        return Rotation.identity(() if size is None else size)
    hi = float(_angle_support(np.array(sigma2)))
    omega = np.linspace(0.0, hi, grid_size)
    dens = _heat_angle_density(omega, sigma2, dmax)
    if np.min(dens) < -1e-9:
        raise ValueError(
            "heat kernel series truncation went negative; increase dmax"
        )
    dens = np.clip(dens, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))]) * (
        omega[1] - omega[0]
    )
    cdf /= cdf[-1]
    u = rng.random(size)
    angles = np.interp(u, cdf, omega)
    axes = _random_axes(rng, np.shape(angles))
    return Rotation.from_axis_angle(axes, angles)


def simulate_noisy_observation(model: CompoundModel, rng, size=None) -> Rotation:
    """Draw Z = compose(M, Y(T)) with independent heat noise M.

    The noise factor is drawn first, then the compound part, so with
    noise_variance = 0 the generator stream coincides with
    `simulate_compound` exactly.
    """
    rng = check_rng(rng)
    noise = sample_heat_kernel(rng, model.noise_variance, size=size)
    signal = simulate_compound(model, rng, size=size)
    return noise.compose(signal)


def _sample_heat_angles_batch(rng: np.random.Generator, variances: np.ndarray,
                              dmax: int = 64, grid_size: int = 1024,
                              chunk: int = 2048) -> np.ndarray:
    """Inverse-CDF angles for many variances at once; zeros give zero angle."""
    v = np.asarray(variances, dtype=float)
    out = np.zeros(v.shape)
    live = np.nonzero(v > 0.0)[0]
    u_all = rng.random(v.shape[0])
    lin = np.linspace(0.0, 1.0, grid_size)
    for start in range(0, live.size, chunk):
        rows = live[start : start + chunk]
        s = v[rows][:, None]
        hi = _angle_support(v[rows])[:, None]
        omega = hi * lin[None, :]
        dens = np.zeros((rows.size, grid_size))
        small = (v[rows] < 1.0)
        if np.any(small):
            dens[small] = _heat_image_density(omega[small], v[rows][small])
        if np.any(~small):
            dens[~small] = _heat_series_density(omega[~small], v[rows][~small], dmax)
        dens = np.clip(dens, 0.0, None)
        cdf = np.concatenate(
            [np.zeros((rows.size, 1)), np.cumsum(0.5 * (dens[:, 1:] + dens[:, :-1]), axis=1)],
            axis=1,
        )
        cdf /= cdf[:, -1:]
        u = u_all[rows][:, None]
        idx = np.clip((cdf < u).sum(axis=1), 1, grid_size - 1)
        r = np.arange(rows.size)
        c_hi, c_lo = cdf[r, idx], cdf[r, idx - 1]
        denom = np.where(c_hi > c_lo, c_hi - c_lo, 1.0)
        frac = np.clip((u[:, 0] - c_lo) / denom, 0.0, 1.0)
        out[rows] = (lin[idx - 1] + frac * (lin[idx] - lin[idx - 1])) * hi[:, 0]
    return out


def simulate_interlaced(model: CompoundModel, rng, size=None, step=None) -> Rotation:
    """Draw Z by interlacing Brownian stretches with jumps along one path.

    Jump times are sorted uniforms on [0, T]; between consecutive events an
    exact heat increment with variance (sigma2 / T) * gap is applied. `step`
    caps the sub-interval length by splitting long gaps into equal pieces,
    which leaves the law unchanged. Draw order: counts, jump times, jumps,
    increment angles, increment axes.
    """
    rng = check_rng(rng)
    if step is not None and not step > 0.0:
        raise ValueError("step must be positive when given")
    shape = () if size is None else tuple(np.atleast_1d(size))
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    t_end = model.horizon
    rate_var = model.noise_variance / t_end  # variance per unit time

    counts = sample_poisson(rng, model.jump_mean, size=n)
    max_n = int(counts.max()) if n else 0
    if max_n > 0:
        u = rng.random((n, max_n))
        u[np.arange(max_n)[None, :] >= counts[:, None]] = np.inf
        times = np.sort(u, axis=1) * t_end
        times = np.minimum(times, t_end)
        bounds = np.concatenate(
            [np.zeros((n, 1)), times, np.full((n, 1), t_end)], axis=1
        )
        gaps = np.diff(bounds, axis=1)  # (n, max_n + 1)
    else:
        gaps = np.full((n, 1), t_end)
    jumps_q = np.atleast_2d(
        model.sample_jumps(rng, size=int(counts.sum())).quaternions
    )

    flat_gaps = gaps.ravel()
    if step is None:
        pieces = np.ones(flat_gaps.shape, dtype=np.int64)
    else:
        pieces = np.maximum(1, np.ceil(flat_gaps / step).astype(np.int64))
    piece_gaps = np.repeat(flat_gaps / pieces, pieces)
    if rate_var > 0.0:
        angles = _sample_heat_angles_batch(rng, rate_var * piece_gaps)
        axes = _random_axes(rng, angles.shape)
        piece_q = Rotation.from_axis_angle(axes, angles).quaternions
    else:
        piece_q = np.zeros(piece_gaps.shape + (4,))
        piece_q[:, 0] = 1.0
    if step is None:
        inc_q = piece_q
    else:
        starts = np.concatenate([[0], np.cumsum(pieces)[:-1]])
        is_start = np.zeros(piece_q.shape[0], dtype=bool)
        is_start[starts] = True
        inc_q = _compose_counted(piece_q[starts], pieces - 1, piece_q[~is_start])
    inc_q = inc_q.reshape(gaps.shape + (4,))

    q = inc_q[:, 0].copy()
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    for k in range(1, gaps.shape[1]):
        idx = np.nonzero(counts >= k)[0]
        if idx.size:
            q[idx] = _hamilton(q[idx], jumps_q[offsets[idx] + k - 1])
        q = _hamilton(q, inc_q[:, k])
    q = _normalized(q)
    return Rotation._wrap(q[0] if size is None else q.reshape(shape + (4,)))


def theoretical_spectrum(model: CompoundModel, lmax: int,
                         jump_spectrum=None) -> np.ndarray:
    """Zonal spectrum b_0..b_lmax of the noisy observable Z."""
    if jump_spectrum is None:
        a = model.jump_spectrum(lmax)
    else:
        a = np.asarray(jump_spectrum, dtype=float)
        if a.shape[0] < lmax + 1:
            raise ValueError("jump_spectrum shorter than lmax + 1")
        a = a[: lmax + 1]
    delta = np.arange(lmax + 1, dtype=float)
    return np.exp(
        model.jump_mean * (a - 1.0)
        - 0.5 * delta * (delta + 1.0) * model.noise_variance
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class ObservationSet:
    """A batch of observed rotations plus provenance, with CSV round trip.

    The CSV layout is a comment header of `# key=value` lines echoing the
    model parameters and seed, one `w,x,y,z` header row, then one quaternion
    per row at 17 significant digits.
    """

    rotations: Rotation
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = {str(k): _fmt(v) for k, v in self.params.items()}
        if self.rotations.quaternions.ndim != 2:
            self.rotations = self.rotations.reshape(-1)

    @property
    def n(self) -> int:
        return len(self.rotations)

    def write_csv(self, path) -> None:
        lines = ["# so3decomp observations"]
        lines.extend(f"# {k}={v}" for k, v in self.params.items())
        lines.append("w,x,y,z")
        q = self.rotations.quaternions
        lines.extend(",".join(format(v, ".17g") for v in row) for row in q)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read_csv(cls, path) -> "ObservationSet":
        params: dict = {}
        rows: list = []
        row_lines: list = []
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        header_seen = False
        for lineno, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    params[key.strip()] = value.strip()
                continue
            if not header_seen:
                if stripped != "w,x,y,z":
                    raise ValueError(
                        f"line {lineno}: expected header 'w,x,y,z', got {stripped!r}"
                    )
                header_seen = True
                continue
            rows.append(stripped.split(","))
            row_lines.append(lineno)
        if not header_seen:
            raise ValueError("missing 'w,x,y,z' header row")
        if not rows:
            return cls(Rotation._wrap(np.zeros((0, 4))), params)
        try:
            q = np.array(rows, dtype=float)
            if q.shape[1] != 4:
                raise ValueError
        except ValueError:
            for i, row in enumerate(rows):
                if len(row) != 4:
                    raise ValueError(
                        f"line {row_lines[i]}: expected 4 fields, got {len(row)}"
                    ) from None
                try:
                    [float(v) for v in row]
                except ValueError:
                    raise ValueError(
                        f"line {row_lines[i]}: non-numeric field in {row!r}"
                    ) from None
            raise
        # rows written by write_csv are already canonical; reload them
        # bit for bit instead of renormalizing
        norms = np.linalg.norm(q, axis=1)
        if np.all(np.abs(norms - 1.0) < 1e-9) and np.all(q[:, 0] >= 0.0):
            return cls(Rotation._wrap(q), params)
        return cls(Rotation(q), params)


def simulate_observations(model: CompoundModel, n: int, seed: int,
                          method: str = "noisy", step=None, workers: int = 1,
                          chunk: int = 16384) -> ObservationSet:
    """Simulate n observations reproducibly, optionally on several threads.

    The sample is split into fixed-size chunks, each driven by its own child
    seed `SeedSequence(seed, spawn_key=(i,))`, so the result depends on the
    seed and chunk size but not on the worker count.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if method not in ("noisy", "compound", "interlaced"):
        raise ValueError(f"unknown simulation method {method!r}")
    if workers < 1:
        raise ValueError("workers must be at least 1")

    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)

    def run(i_m):
        i, m = i_m
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        if method == "interlaced":
            r = simulate_interlaced(model, rng, size=m, step=step)
        elif method == "compound":
            r = simulate_compound(model, rng, size=m)
        else:
            r = simulate_noisy_observation(model, rng, size=m)
        return r.quaternions

    tasks = list(enumerate(sizes))
    if workers == 1 or len(tasks) <= 1:
        parts = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, tasks))
    q = np.concatenate(parts, axis=0) if parts else np.zeros((0, 4))
    params = {
        "n": n,
        "seed": seed,
        "method": method,
        "rate": model.rate,
        "horizon": model.horizon,
        "noise_variance": model.noise_variance,
    }
    g = getattr(model.jump_law, "g", None)
    if g is not None:
        params["g"] = g
    return ObservationSet(Rotation._wrap(q), params)
