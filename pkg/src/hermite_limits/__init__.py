"""Simulation and verification of limit theorems for nonlinear functionals of
fractional Brownian motion and Volterra processes."""

from .core_math import (BREVE, HAT, TILDE, FunctionalKind, Hurst, LimitPrediction, QuadratureSpec,
                        Regime, c_kH, classify_regime, fbm_covariance, hermite_poly,
                        integral_rho_power, limit_prediction, psi, rho, rho_eps_eta,
                        second_moment_exact, sigma_breve_sq, sigma_hat_sq)
from .errors import (AlignmentError, ConfigError, DivergenceError, DomainError, EmbeddingError,
                     HermiteLimitsError, NumericalError, QuadratureError, RegimeError)
from .functionals import (EpsSpec, FunctionalSample, Normalization, bilinear_functional, evaluate,
                          hat_decomposition_residual, hermite_variation)
from .mc_lab import (ExperimentConfig, ExperimentReport, StatTestResult, contraction_norm_bound,
                     ks_normal_test, mixed_limit_cf_test, run_experiment,
                     variance_scaling_regression)
from .path_engine import FbmPath, GridSpec, Method, PathPair, build_paths, generate_fgn, mix64
from .white_noise import (KernelContext, TestFunction, hermite_function, identity_residual,
                          inner_product_transform, s_transform)

__version__ = "0.1.0"

__all__ = [
    "BREVE", "HAT", "TILDE", "FunctionalKind", "Hurst", "LimitPrediction", "QuadratureSpec",
    "Regime", "c_kH", "classify_regime", "fbm_covariance", "hermite_poly", "integral_rho_power",
    "limit_prediction", "psi", "rho", "rho_eps_eta", "second_moment_exact", "sigma_breve_sq",
    "sigma_hat_sq",
    "AlignmentError", "ConfigError", "DivergenceError", "DomainError", "EmbeddingError",
    "HermiteLimitsError", "NumericalError", "QuadratureError", "RegimeError",
    "EpsSpec", "FunctionalSample", "Normalization", "bilinear_functional", "evaluate",
    "hat_decomposition_residual", "hermite_variation",
    "ExperimentConfig", "ExperimentReport", "StatTestResult", "contraction_norm_bound",
    "ks_normal_test", "mixed_limit_cf_test", "run_experiment", "variance_scaling_regression",
    "FbmPath", "GridSpec", "Method", "PathPair", "build_paths", "generate_fgn", "mix64",
    "KernelContext", "TestFunction", "hermite_function", "identity_residual",
    "inner_product_transform", "s_transform",
]
