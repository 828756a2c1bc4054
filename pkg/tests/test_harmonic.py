"""Legendre polynomials, characters, Wigner matrices and Fourier coefficients."""

import numpy as np
import pytest

from conftest import wigner_d_reference
from so3decomp import (
    Rotation,
    character,
    gauss_legendre_theta,
    irrep_matrix,
    laplace_eigenvalue,
    legendre_all,
    legendre_coeff,
    legendre_p,
    legendre_series,
    legendre_spectrum,
    plancherel_norm_sq,
    sample_haar,
    wigner_d,
)
from so3decomp.harmonic import fourier_coefficient, iter_wigner_d
from so3decomp.scattering import hg_density


class TestLegendre:
    def test_low_degrees(self):
        x = np.linspace(-1.0, 1.0, 21)
        assert np.allclose(legendre_p(0, x), 1.0)
        assert np.allclose(legendre_p(1, x), x)
        assert np.allclose(legendre_p(2, x), 1.5 * x**2 - 0.5)

    def test_p3_at_half(self):
        assert legendre_p(3, 0.5) == pytest.approx(-0.4375, abs=1e-15)

    def test_endpoints(self):
        for delta in (0, 1, 5, 17):
            assert legendre_p(delta, 1.0) == pytest.approx(1.0, abs=1e-13)
            assert legendre_p(delta, -1.0) == pytest.approx((-1.0) ** delta, abs=1e-13)

    def test_against_numpy_polynomial(self):
        x = np.linspace(-1.0, 1.0, 101)
        table = legendre_all(31, x)
        for delta in range(32):
            coeffs = np.zeros(delta + 1)
            coeffs[delta] = 1.0
            assert np.abs(table[delta] - np.polynomial.legendre.legval(x, coeffs)).max() < 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            legendre_p(2, 1.5)


class TestCharacter:
    def test_identity_value(self):
        for delta in range(6):
            assert character(delta, 0.0) == pytest.approx(2 * delta + 1)

    def test_dirichlet_form(self):
        omega = np.linspace(0.05, np.pi, 40)
        for delta in range(8):
            closed = np.sin((delta + 0.5) * omega) / np.sin(omega / 2.0)
            assert np.abs(character(delta, omega) - closed).max() < 1e-11

    def test_class_function(self):
        rng = np.random.default_rng(40)
        r = sample_haar(rng, 32)
        k = sample_haar(rng, 32)
        conj = k * r * k.inverse()
        for delta in (1, 2, 5):
            assert np.allclose(
                character(delta, conj.angle()), character(delta, r.angle()), atol=1e-6
            )

    def test_trace_of_irrep(self):
        rng = np.random.default_rng(41)
        r = sample_haar(rng, 16)
        for delta in (1, 2, 3):
            tr = np.trace(irrep_matrix(delta, r), axis1=-2, axis2=-1)
            assert np.abs(tr.imag).max() < 1e-12
            assert np.abs(tr.real - character(delta, r.angle())).max() < 1e-10


def test_laplace_eigenvalue():
    assert laplace_eigenvalue(0) == 0.0
    assert laplace_eigenvalue(1) == 2.0
    assert laplace_eigenvalue(5) == 30.0


class TestQuadrature:
    def test_weights_normalized(self):
        theta, w = gauss_legendre_theta(32)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all((theta > 0.0) & (theta < np.pi))

    def test_legendre_orthogonality(self):
        theta, w = gauss_legendre_theta(48)
        table = legendre_all(8, np.cos(theta))
        gram = (table * w) @ table.T
        expected = np.diag(1.0 / (2.0 * np.arange(9) + 1.0))
        assert np.abs(gram - expected).max() < 1e-14


class TestWignerD:
    def test_matches_matrix_exponential(self):
        for theta in (0.3, 1.1, 2.7):
            for delta in range(9):
                ref = wigner_d_reference(delta, theta)
                assert np.abs(wigner_d(delta, theta) - ref).max() < 1e-12

    def test_degree_one_closed_form(self):
        theta = 0.7
        c, s = np.cos(theta), np.sin(theta)
        expected = np.array([
            [(1 + c) / 2, s / np.sqrt(2), (1 - c) / 2],
            [-s / np.sqrt(2), c, s / np.sqrt(2)],
            [(1 - c) / 2, -s / np.sqrt(2), (1 + c) / 2],
        ])
        assert np.abs(wigner_d(1, theta) - expected).max() < 1e-14

    def test_center_entry_is_legendre(self):
        theta = np.linspace(0.01, np.pi - 0.01, 50)
        for delta, block in iter_wigner_d(31, theta):
            assert np.abs(block[:, delta, delta] - legendre_p(delta, np.cos(theta))).max() < 1e-10

    def test_rows_orthonormal_at_high_degree(self):
        block = wigner_d(40, 1.3)
        assert np.abs(block @ block.T - np.eye(81)).max() < 1e-12

    def test_additive_in_theta(self):
        # d(s)d(t) = d(s + t): one-parameter subgroup
        s, t = 0.5, 0.9
        for delta in (2, 7, 20):
            prod = wigner_d(delta, s) @ wigner_d(delta, t)
            assert np.abs(prod - wigner_d(delta, s + t)).max() < 1e-11

    def test_identity_angle(self):
        assert np.allclose(wigner_d(3, 0.0), np.eye(7), atol=1e-14)


class TestIrrep:
    def test_unitarity(self):
        rng = np.random.default_rng(50)
        r = sample_haar(rng, 100)
        for delta in (1, 2, 7, 15):
            u = irrep_matrix(delta, r)
            gram = u @ np.conj(np.swapaxes(u, -1, -2))
            eye = np.eye(2 * delta + 1)
            assert np.abs(gram - eye).max() < 1e-9

    def test_homomorphism(self):
        rng = np.random.default_rng(51)
        a = sample_haar(rng, 40)
        b = sample_haar(rng, 40)
        for delta in (1, 3, 8):
            left = irrep_matrix(delta, a * b)
            right = irrep_matrix(delta, a) @ irrep_matrix(delta, b)
            assert np.abs(left - right).max() < 1e-8

    def test_trivial_representation(self):
        rng = np.random.default_rng(52)
        r = sample_haar(rng, 10)
        assert np.allclose(irrep_matrix(0, r), np.ones((10, 1, 1)), atol=1e-14)

    def test_identity_rotation(self):
        u = irrep_matrix(4, Rotation.identity())
        assert np.abs(u - np.eye(9)).max() < 1e-13

    def test_orthogonality_in_quadrature(self):
        """Matrix entries are orthogonal with squared norm 1/(2 delta + 1)."""
        n_theta, n_az = 32, 24
        theta, wt = gauss_legendre_theta(n_theta)
        az = 2.0 * np.pi * np.arange(n_az) / n_az
        grid = np.stack(np.meshgrid(az, theta, az, indexing="ij"), axis=-1)
        r = Rotation.from_euler_zyz(grid.reshape(-1, 3))
        weights = (np.ones(n_az)[:, None, None]
                   * wt[None, :, None]
                   * np.ones(n_az)[None, None, :]).ravel() / n_az**2
        flats = {}
        for delta in range(6):
            u = irrep_matrix(delta, r)
            flats[delta] = u.reshape(len(r), -1)
        for d1 in range(6):
            for d2 in range(d1 + 1):
                gram = (flats[d1] * weights[:, None]).T @ np.conj(flats[d2])
                if d1 != d2:
                    assert np.abs(gram).max() < 1e-6
                else:
                    dim = 2 * d1 + 1
                    expected = np.eye(dim * dim) / dim
                    assert np.abs(gram - expected).max() < 1e-6


class TestSpectra:
    def test_hg_coefficients(self):
        g = 0.9
        for delta in (0, 1, 4, 12):
            a = legendre_coeff(lambda t: hg_density(g, t), delta)
            assert a == pytest.approx(g**delta, abs=1e-9)

    def test_constant_density_spectrum(self):
        # flat density on the group: only the trivial degree survives
        spectrum = legendre_spectrum(lambda t: np.ones_like(t), 8)
        assert spectrum[0] == pytest.approx(1.0, abs=1e-10)
        assert np.abs(spectrum[1:]).max() < 1e-10

    def test_spectrum_vector_matches_scalar(self):
        g = 0.7
        spectrum = legendre_spectrum(lambda t: hg_density(g, t), 10)
        assert spectrum.shape == (11,)
        assert np.abs(spectrum - g ** np.arange(11)).max() < 1e-9

    def test_series_projection_round_trip(self):
        coeffs = 0.8 ** np.arange(12)
        back = legendre_spectrum(lambda t: legendre_series(coeffs, t), 11)
        assert np.abs(back - coeffs).max() < 1e-9

    def test_series_constant_term(self):
        coeffs = np.zeros(5)
        coeffs[0] = 1.0
        theta = np.linspace(0.0, np.pi, 20)
        assert np.allclose(legendre_series(coeffs, theta), 1.0, atol=1e-14)


class TestPlancherel:
    def test_zero(self):
        assert plancherel_norm_sq(np.zeros(6)) == 0.0

    def test_single_degree(self):
        coeffs = np.zeros(4)
        coeffs[1] = 1.0
        assert plancherel_norm_sq(coeffs) == pytest.approx(3.0)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(60)
        coeffs = rng.uniform(-1.0, 1.0, size=14)
        theta, w = gauss_legendre_theta(64)
        values = legendre_series(coeffs, theta)
        integral = float(np.sum(w * values**2))
        assert integral == pytest.approx(plancherel_norm_sq(coeffs), rel=1e-12)


class TestFourierCoefficient:
    def test_zonal_density_is_single_entry(self):
        g = 0.5
        for delta in range(6):
            mat = fourier_coefficient(
                lambda r: hg_density(g, np.arccos(r.z_axis_cosine())), delta
            )
            expected = np.zeros((2 * delta + 1, 2 * delta + 1))
            expected[delta, delta] = g**delta
            assert np.abs(mat - expected).max() < 1e-6

    def test_constant_function(self):
        mat = fourier_coefficient(lambda r: np.ones(r.shape), 2)
        assert np.abs(mat).max() < 1e-12
