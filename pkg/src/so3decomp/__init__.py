"""Compound Poisson processes on the rotation group and their decompounding.

The package simulates products of random rotations observed through optional
Brownian blur, and recovers the zonal jump density nonparametrically by
inverting the compounding relation degree by degree on the Fourier side.
"""

from .rotations import Rotation, ZonalAngleSampler, sample_haar, sample_zonal
from .harmonic import (
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
    wigner_d,
)
from .processes import (
    CompoundModel,
    ObservationSet,
    heat_spectrum,
    sample_heat_kernel,
    sample_poisson,
    simulate_compound,
    simulate_interlaced,
    simulate_noisy_observation,
    simulate_observations,
    theoretical_spectrum,
)
from .decompound import (
    EstimatorConfig,
    ParametricEstimate,
    ReconstructedDensity,
    decompound,
    decompound_with_prior,
    empirical_char,
    empirical_char_zonal,
    empirical_zonal_spectrum,
    error_decomposition,
    invert_compounding,
    matrix_log_hpd,
    mean_character,
    prior_gate,
    psd_gate,
    reconstruct_density,
    smoothing_weights,
)
from .scattering import (
    HenyeyGreenstein,
    estimate_g,
    hg_cdf,
    hg_density,
    mixture_cdf,
    mixture_density,
    transmitted_intensity,
)
from .estimator import ZonalDecompounder

__version__ = "0.1.0"

__all__ = [
    "Rotation",
    "ZonalAngleSampler",
    "sample_haar",
    "sample_zonal",
    "character",
    "gauss_legendre_theta",
    "irrep_matrix",
    "laplace_eigenvalue",
    "legendre_all",
    "legendre_coeff",
    "legendre_p",
    "legendre_series",
    "legendre_spectrum",
    "plancherel_norm_sq",
    "wigner_d",
    "CompoundModel",
    "ObservationSet",
    "heat_spectrum",
    "sample_heat_kernel",
    "sample_poisson",
    "simulate_compound",
    "simulate_interlaced",
    "simulate_noisy_observation",
    "simulate_observations",
    "theoretical_spectrum",
    "EstimatorConfig",
    "ParametricEstimate",
    "ReconstructedDensity",
    "decompound",
    "decompound_with_prior",
    "empirical_char",
    "empirical_char_zonal",
    "empirical_zonal_spectrum",
    "error_decomposition",
    "invert_compounding",
    "matrix_log_hpd",
    "mean_character",
    "prior_gate",
    "psd_gate",
    "reconstruct_density",
    "smoothing_weights",
    "HenyeyGreenstein",
    "estimate_g",
    "hg_cdf",
    "hg_density",
    "mixture_cdf",
    "mixture_density",
    "transmitted_intensity",
    "ZonalDecompounder",
    "__version__",
]
