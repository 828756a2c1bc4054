"""End-to-end acceptance runs.

Each test prints one PASS/FAIL line with the measured figure of merit, so
`pytest -s tests/test_acceptance.py` doubles as a build report. Tolerances
and runtime caps are asserted, not just printed.
"""

import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import chi2

from so3decomp import (
    CompoundModel,
    EstimatorConfig,
    HenyeyGreenstein,
    Rotation,
    decompound,
    empirical_char,
    error_decomposition,
    estimate_g,
    invert_compounding,
    irrep_matrix,
    legendre_all,
    legendre_spectrum,
    matrix_log_hpd,
    mean_character,
    mixture_cdf,
    sample_haar,
    simulate_compound,
    simulate_interlaced,
    simulate_noisy_observation,
    theoretical_spectrum,
    transmitted_intensity,
)
from so3decomp.harmonic import iter_wigner_d
from so3decomp.scattering import hg_density

from conftest import ks_two_sample

RATE, HORIZON, G = 0.3, 10.0, 0.9


def verdict(label, ok, detail):
    print(f"{label}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def mc_replications():
    """Twenty seeded replications, each fit on nested prefixes of one draw."""
    start = time.monotonic()
    model = CompoundModel(RATE, HORIZON, HenyeyGreenstein(G))
    config = EstimatorConfig(rate=RATE, horizon=HORIZON, cutoff=31)
    fits = []
    for rep in range(20):
        rng = np.random.default_rng(1000 + rep)
        q = simulate_compound(model, rng, 50000).quaternions
        fits.append({n: decompound(q[:n], config) for n in (500, 5000, 50000)})
    return {"fits": fits, "elapsed": time.monotonic() - start}


class TestAcceptance:
    def test_01_spectrum_identity(self):
        start = time.monotonic()
        worst = 0.0
        for g in (0.85, 0.9, 0.95, 0.99):
            coeffs = legendre_spectrum(lambda t: hg_density(g, t), 31)
            worst = max(worst, np.abs(coeffs - g ** np.arange(32)).max())
        elapsed = time.monotonic() - start
        verdict(
            "criterion 1",
            worst < 1e-6 and elapsed < 1.0,
            f"max |coeff - g^delta| = {worst:.2e}, {elapsed:.2f} s",
        )

    def test_02_oracle_round_trip(self):
        start = time.monotonic()
        worst = 0.0
        for sigma2 in (0.0, 0.05):
            model = CompoundModel(RATE, HORIZON, HenyeyGreenstein(G), sigma2)
            config = EstimatorConfig(
                rate=RATE, horizon=HORIZON, noise_variance=sigma2, cutoff=31
            )
            b = theoretical_spectrum(model, 30)
            for delta in range(31):
                a = invert_compounding(b[delta], config, delta)
                worst = max(worst, abs(a - G**delta))
        elapsed = time.monotonic() - start
        verdict(
            "criterion 2",
            worst < 1e-10 and elapsed < 1.0,
            f"max round-trip error = {worst:.2e}, {elapsed:.2f} s",
        )

    def test_03_monte_carlo_decompounding(self, mc_replications):
        start = time.monotonic()
        truth = G ** np.arange(31)
        fits = mc_replications["fits"]

        fixed = np.abs(fits[0][50000].coefficients - truth)
        low, mid = fixed[:6].max(), fixed[:21].max()

        errors = np.array(
            [[np.abs(fits[r][n].coefficients - truth) for n in (500, 5000, 50000)]
             for r in range(20)]
        )
        medians = np.median(errors, axis=0)
        decreasing = bool(
            np.all(medians[0, 1:11] > medians[1, 1:11])
            and np.all(medians[1, 1:11] > medians[2, 1:11])
            and np.all(medians[:, 0] == 0.0)
        )
        elapsed = mc_replications["elapsed"] + (time.monotonic() - start)
        verdict(
            "criterion 3",
            low < 0.03 and mid < 0.15 and decreasing and elapsed < 300.0,
            f"|a_hat - g^delta| = {low:.3f} (delta<=5), {mid:.3f} (delta<=20), "
            f"medians decreasing in n for delta 1..10: {decreasing}, {elapsed:.1f} s",
        )

    def test_04_naive_g_estimation(self, mc_replications):
        start = time.monotonic()
        fits = mc_replications["fits"]

        big = fits[0][50000]
        g_hat = estimate_g(big.coefficients, big.gate_passed)
        g_err = np.abs(g_hat[1:6] - G).max()

        unstable = 0
        for rep in fits:
            small = rep[500]
            tail_coeff = small.coefficients[25:]
            tail_gate = small.gate_passed[25:]
            if np.any(~tail_gate) or np.any(tail_coeff < 0.0):
                unstable += 1
        elapsed = mc_replications["elapsed"] + (time.monotonic() - start)
        verdict(
            "criterion 4",
            g_err < 0.02 and unstable >= 1 and elapsed < 300.0,
            f"max |g_hat - 0.9| = {g_err:.4f} (delta<=5), tail failures at n=500 "
            f"in {unstable}/20 replications, {elapsed:.1f} s",
        )

    def test_05_error_shrinks_with_g(self):
        start = time.monotonic()
        config = EstimatorConfig(rate=RATE, horizon=HORIZON, cutoff=31)
        parametric = {}
        for gi, g in enumerate((0.85, 0.99)):
            law = HenyeyGreenstein(g)
            model = CompoundModel(RATE, HORIZON, law)
            truth = g ** np.arange(31)
            tail = law.tail_norm_sq(31)
            errs = []
            for rep in range(5):
                rng = np.random.default_rng(7000 + 10 * gi + rep)
                fit = decompound(simulate_compound(model, rng, 50000), config)
                errs.append(error_decomposition(fit, truth, tail).parametric)
            parametric[g] = np.array(errs)
        separated = parametric[0.99].max() < parametric[0.85].min()
        elapsed = time.monotonic() - start
        verdict(
            "criterion 5",
            separated and elapsed < 600.0,
            f"parametric error g=0.99 max {parametric[0.99].max():.2e} < "
            f"g=0.85 min {parametric[0.85].min():.2e}, {elapsed:.1f} s",
        )

    def test_06_long_horizon_uniformization(self):
        start = time.monotonic()
        model = CompoundModel(RATE, 100.0, HenyeyGreenstein(G))
        draws = simulate_compound(model, np.random.default_rng(41), 10000)
        chars = np.array([abs(mean_character(draws, d)) for d in range(1, 6)])
        elapsed = time.monotonic() - start
        verdict(
            "criterion 6",
            chars.max() < 0.05 and elapsed < 60.0,
            f"max |mean character| = {chars.max():.4f} for delta 1..5, {elapsed:.1f} s",
        )

    def test_07_interlacing_equivalence(self):
        start = time.monotonic()
        model = CompoundModel(RATE, HORIZON, HenyeyGreenstein(G), 0.05)
        noisy = simulate_noisy_observation(model, np.random.default_rng(42), 10000)
        inter = simulate_interlaced(model, np.random.default_rng(43), 10000)
        stat = ks_two_sample(noisy.angle(), inter.angle())
        bound = 1.628 * np.sqrt(2.0 / 10000)
        elapsed = time.monotonic() - start
        verdict(
            "criterion 7",
            stat < bound and elapsed < 120.0,
            f"two-sample KS = {stat:.4f} < {bound:.4f}, {elapsed:.1f} s",
        )

    def test_08_property_suites(self):
        start = time.monotonic()
        rng = np.random.default_rng(5150)
        checks = {}

        # representation unitarity and the product rule
        rots = sample_haar(rng, 30)
        pairs = sample_haar(rng, 20), sample_haar(rng, 20)
        worst_u, worst_h = 0.0, 0.0
        for delta in (1, 3, 8):
            u = irrep_matrix(delta, rots)
            eye = np.eye(2 * delta + 1)
            worst_u = max(
                worst_u,
                np.abs(u @ u.conj().swapaxes(-1, -2) - eye).max(),
            )
            left = irrep_matrix(delta, pairs[0].compose(pairs[1]))
            right = irrep_matrix(delta, pairs[0]) @ irrep_matrix(delta, pairs[1])
            worst_h = max(worst_h, np.abs(left - right).max())
        checks["unitarity"] = worst_u < 1e-8
        checks["homomorphism"] = worst_h < 1e-8

        # central Wigner entry against the Legendre polynomials
        theta = rng.uniform(0.0, np.pi, 24)
        flats = legendre_all(31, np.cos(theta))
        worst_d = 0.0
        for t, column in zip(theta, flats.T):
            for delta, block in iter_wigner_d(31, t):
                worst_d = max(worst_d, abs(block[delta, delta] - column[delta]))
        checks["wigner_center"] = worst_d < 1e-10

        # symmetrization lands exactly on the Hermitian subspace
        sym_exact = True
        for _ in range(20):
            a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
            s = 0.5 * (a + a.conj().T)
            sym_exact &= bool(np.array_equal(s, s.conj().T))
        checks["symmetrization"] = sym_exact

        # empirical characteristic stays inside the unit operator ball
        model = CompoundModel(3.0, 1.0, HenyeyGreenstein(G))
        draws = simulate_compound(model, rng, 2000)
        norms = [
            np.linalg.norm(empirical_char(draws, d), ord=2) for d in (1, 2, 3)
        ]
        checks["operator_norm"] = max(norms) <= 1.0 + 1e-12

        # eigenvalue perturbation bound, 100 Hermitian pairs
        wh_ok = True
        for _ in range(100):
            a = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
            b = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
            a, b = 0.5 * (a + a.conj().T), 0.5 * (b + b.conj().T)
            alpha, beta = np.linalg.eigvalsh(a), np.linalg.eigvalsh(b)
            gap = np.sum((beta - alpha) ** 2)
            wh_ok &= gap <= np.linalg.norm(b - a) ** 2 + 1e-10
        checks["eigenvalue_stability"] = wh_ok

        # matrix-log Lipschitz bound on spectra bounded away from zero
        k, dim = 0.25, 5
        log_ok = True
        for _ in range(100):
            mats = []
            for _pair in range(2):
                z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                q, _ = np.linalg.qr(z)
                spectrum = rng.uniform(k, 1.0, dim)
                mats.append((q * spectrum) @ q.conj().T)
            a, b = [0.5 * (m + m.conj().T) for m in mats]
            gap = np.linalg.norm(matrix_log_hpd(b) - matrix_log_hpd(a))
            log_ok &= gap <= np.sqrt(dim) / k**2 * np.linalg.norm(b - a) + 1e-12
        checks["log_lipschitz"] = log_ok

        # risk split adds up exactly
        est = 0.9 ** np.arange(31) + 0.01
        truth = 0.9 ** np.arange(50)
        split = error_decomposition(est, truth)
        checks["risk_identity"] = split.total == split.parametric + split.truncation

        # deflection histogram against the atom-plus-series mixture
        sample = simulate_compound(model, np.random.default_rng(77), 20000)
        angles = np.arccos(np.clip(sample.z_axis_cosine(), -1.0, 1.0))
        positive = angles[angles > 0.0]
        atom = np.exp(-3.0)

        def conditioned(t):
            return (mixture_cdf(G, 3.0, t) - atom) / (1.0 - atom)

        edges = [0.0] + [
            brentq(lambda t, p=p: conditioned(t) - p, 1e-12, np.pi)
            for p in np.arange(1, 25) / 25.0
        ] + [np.pi]
        counts, _ = np.histogram(positive, bins=edges)
        expected = positive.size / 25.0
        stat = np.sum((counts - expected) ** 2) / expected
        checks["mixture_fit"] = stat < chi2.ppf(0.99, 24)

        elapsed = time.monotonic() - start
        failed = sorted(name for name, ok in checks.items() if not ok)
        verdict(
            "criterion 8",
            not failed and elapsed < 30.0,
            f"{len(checks)} property suites, failed: {failed or 'none'}, "
            f"chi2 = {stat:.1f}, {elapsed:.1f} s",
        )

    def test_09_forward_scattering_cdf(self):
        start = time.monotonic()
        n = 100000
        model = CompoundModel(3.0, 1.0, HenyeyGreenstein(G))
        draws = simulate_compound(model, np.random.default_rng(314), n)
        theta = np.arccos(np.clip(draws.z_axis_cosine(), -1.0, 1.0))
        atom_count = int(np.count_nonzero(theta == 0.0))
        positive = np.sort(theta[theta > 0.0])

        curve = transmitted_intensity(G, 3.0, 1.0, positive)
        ranks = atom_count + np.arange(1, positive.size + 1)
        stat = max(
            abs(atom_count / n - np.exp(-3.0)),
            np.abs(ranks / n - curve).max(),
            np.abs((ranks - 1) / n - curve).max(),
        )
        bound = 1.5 * 1.628 / np.sqrt(n)
        elapsed = time.monotonic() - start
        verdict(
            "criterion 9",
            stat < bound and elapsed < 60.0,
            f"sup distance = {stat:.4f} < {bound:.4f}, atom share "
            f"{atom_count / n:.4f}, {elapsed:.1f} s",
        )
