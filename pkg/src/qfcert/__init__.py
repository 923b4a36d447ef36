"""Spectral regularity certificates for laws of quadratic forms.

The library computes, for a quadratic form <X, A X> in i.i.d. coordinates
from a Dirichlet structure, the spectral quantities (remainders, influences,
determinantal masses) that control the smoothness of its law, and verifies
the supporting identities (Cauchy-Binet, influence bounds, mass splitting,
Fourier-Laplace equivalence, Gaussian quadratic-form characteristic
functions, small-ball exponents) by exact oracles and seeded Monte Carlo.
"""

from .certify import CertificateReport, Overrides, certify_quadratic, eta_q, ibp_check, tau_q
from .determinantal import DeterminantalOperator, build_from_operator, ell1_influences
from .estimation import EcfTable, density_reconstruct, ecf, fourier_sobolev_norm, ks_distance
from .gaussderiv import (
    CylinderFunctional,
    QuadraticFunctional,
    conditional_cf_identity,
    derivative_samples,
    gaussian_quadratic_cf,
    hessian_main_term,
    remainder_negative_moment,
)
from .laws import DirichletVariable, SampleBatch, carre_du_champ, generator_apply, sample_batch, smallball_exponent
from .logdomain import LogScalar
from .multilinear import MultilinearPolynomial, evaluate, partial_influence_poly, smallball_estimate, theta_recursion
from .spectral import (
    SpectrumSummary,
    SymmetricOperator,
    cauchy_binet_oracle,
    eigendecompose,
    extract,
    influences,
    load_operator,
    spectral_radius_bounds_check,
    spectral_remainders,
    summarize,
)
from .splitting import SplitTree, iterated_split, split_once

__version__ = "0.1.0"

__all__ = [
    "CertificateReport",
    "CylinderFunctional",
    "DeterminantalOperator",
    "DirichletVariable",
    "EcfTable",
    "LogScalar",
    "MultilinearPolynomial",
    "Overrides",
    "QuadraticFunctional",
    "SampleBatch",
    "SpectrumSummary",
    "SplitTree",
    "SymmetricOperator",
    "build_from_operator",
    "carre_du_champ",
    "cauchy_binet_oracle",
    "certify_quadratic",
    "conditional_cf_identity",
    "density_reconstruct",
    "derivative_samples",
    "ecf",
    "eigendecompose",
    "ell1_influences",
    "eta_q",
    "evaluate",
    "extract",
    "fourier_sobolev_norm",
    "gaussian_quadratic_cf",
    "generator_apply",
    "hessian_main_term",
    "ibp_check",
    "influences",
    "iterated_split",
    "ks_distance",
    "load_operator",
    "partial_influence_poly",
    "remainder_negative_moment",
    "sample_batch",
    "smallball_estimate",
    "smallball_exponent",
    "spectral_radius_bounds_check",
    "spectral_remainders",
    "split_once",
    "summarize",
    "tau_q",
    "theta_recursion",
]
