import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hermite_limits.core_math import (BREVE, HAT, TILDE, FunctionalKind, Hurst, QuadratureSpec,
                                      Regime, _LagFunctions, c_kH, classify_regime,
                                      fbm_covariance, hermite_poly, integral_rho_power,
                                      limit_prediction, psi, rho, rho_eps_eta,
                                      rho_half_line_integral, second_moment_exact,
                                      sigma_breve_sq, sigma_hat_sq)
from hermite_limits.errors import DivergenceError, DomainError, RegimeError

hursts = st.floats(min_value=0.02, max_value=0.98)


def rho_direct(h, x):
    x = np.abs(np.asarray(x, dtype=float))
    return 0.5 * ((x + 1) ** (2 * h) + np.abs(x - 1) ** (2 * h) - 2 * x ** (2 * h))


# --- Hurst and quadrature settings -------------------------------------------------------


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5, float("nan")])
def test_hurst_rejects_values_outside_unit_interval(bad):
    with pytest.raises(DomainError):
        Hurst(bad)


@given(hursts, st.integers(min_value=1, max_value=6))
def test_hurst_regime_helpers_partition(h, k):
    hu = Hurst(h)
    flags = [hu.is_clt(k), hu.is_critical(k), hu.is_hermite(k)]
    assert sum(flags) == 1


def test_hurst_critical_detection_uses_absolute_tolerance():
    assert Hurst(0.75).is_critical(2)
    assert Hurst(0.75 + 5e-13).is_critical(2)
    assert Hurst(0.75 + 1e-9).is_hermite(2)
    assert Hurst(0.75 - 1e-9).is_clt(2)


@pytest.mark.parametrize("kwargs", [{"abs_tol": 0}, {"rel_tol": -1}, {"tail_cutoff": 1.5}])
def test_quadrature_spec_validation(kwargs):
    with pytest.raises(DomainError):
        QuadratureSpec(**kwargs)


# --- Hermite polynomials ------------------------------------------------------------------


@pytest.mark.parametrize("k,x,expected", [(2, 2.0, 3.0), (0, 7.3, 1.0), (3, 2.0, 2.0),
                                          (4, 1.5, 1.5 ** 4 - 6 * 1.5 ** 2 + 3)])
def test_hermite_poly_values(k, x, expected):
    assert hermite_poly(k, x) == pytest.approx(expected, rel=1e-14)


def test_hermite_poly_matches_numpy_hermite_e():
    x = np.linspace(-4, 4, 41)
    for k in range(12):
        coeffs = np.zeros(k + 1)
        coeffs[k] = 1
        np.testing.assert_allclose(hermite_poly(k, x), np.polynomial.hermite_e.hermeval(x, coeffs),
                                   rtol=1e-11, atol=1e-9)


@pytest.mark.parametrize("k", [-1, 51, 2.5])
def test_hermite_poly_rejects_degree(k):
    with pytest.raises(DomainError):
        hermite_poly(k, 1.0)


def test_hermite_poly_orthogonality_under_gaussian():
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    for j in range(6):
        for k in range(6):
            inner = np.sum(w * hermite_poly(j, x) * hermite_poly(k, x))
            assert inner == pytest.approx(math.factorial(k) if j == k else 0.0, abs=1e-9)


# --- covariance functions -----------------------------------------------------------------


def test_rho_examples():
    assert rho(0.3, 0.0) == pytest.approx(1.0)
    assert rho(0.5, 0.5) == pytest.approx(0.5)
    assert rho(0.5, 3.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("h", np.linspace(0.04, 0.96, 20))
def test_rho_even_and_unit_at_origin(h):
    x = np.linspace(-60, 60, 1000)
    np.testing.assert_allclose(rho(h, x), rho(h, -x), rtol=1e-12, atol=1e-15)
    assert rho(h, 0.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("h", [0.1, 0.3, 0.7, 0.9])
def test_rho_far_field_series_matches_high_precision(h):
    import mpmath as mp
    mp.mp.dps = 40
    for x in (35.0, 100.0, 1e3, 1e5):
        exact = float((abs(mp.mpf(x) + 1) ** (2 * mp.mpf(h)) + abs(mp.mpf(x) - 1) ** (2 * mp.mpf(h))
                       - 2 * mp.mpf(x) ** (2 * mp.mpf(h))) / 2)
        assert rho(h, x) == pytest.approx(exact, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(hursts, st.floats(1e-4, 2.0), st.floats(-50, 50))
def test_rho_eps_eta_scaling(h, eps, x):
    lhs = rho_eps_eta(h, eps, eps, x)
    rhs = eps ** (2 * h) * rho(h, x / eps)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14 * eps ** (2 * h))


def test_rho_eps_eta_reductions_and_errors():
    x = np.linspace(-5, 5, 21)
    np.testing.assert_allclose(rho_eps_eta(0.3, 1.0, 1.0, x), rho(0.3, x), rtol=1e-13, atol=1e-15)
    assert rho_eps_eta(0.7, 0.1, 0.1, 0.0) == pytest.approx(0.1 ** 1.4)
    with pytest.raises(DomainError):
        rho_eps_eta(0.3, 0.0, 1.0, 0.2)
    with pytest.raises(DomainError):
        rho_eps_eta(0.3, 1.0, -1.0, 0.2)


def test_rho_eps_eta_is_increment_covariance():
    h, eps, eta, u, v = 0.35, 0.2, 0.07, 0.9, 0.4

    def R(t, s):
        return 0.5 * (t ** (2 * h) + s ** (2 * h) - abs(t - s) ** (2 * h))

    cov = R(u + eps, v + eta) - R(u + eps, v) - R(u, v + eta) + R(u, v)
    assert rho_eps_eta(h, eps, eta, u - v) == pytest.approx(cov, rel=1e-12)


def test_fbm_covariance():
    assert fbm_covariance(0.3, 2.0, 2.0) == pytest.approx(2.0 ** 0.6)
    assert fbm_covariance(0.5, 0.7, 0.2) == pytest.approx(0.2)
    assert fbm_covariance(0.8, 1.3, 0.0) == 0.0
    with pytest.raises(DomainError):
        fbm_covariance(0.3, -1.0, 1.0)


@pytest.mark.parametrize("h", [0.1, 0.4, 0.75])
def test_psi_values_and_asymptote(h):
    assert psi(h, 0.0) == pytest.approx(-2.0)
    x = np.linspace(0.1, 40, 50)
    np.testing.assert_allclose(psi(h, x), psi(h, -x), rtol=1e-12)
    big = 1e6
    assert psi(h, big) / big ** (2 * h) == pytest.approx(-(2 * h + 2) * (2 * h + 1), rel=1e-6)


# --- half-line integrals -----------------------------------------------------------------

# 40-digit quadrature on [0, 64] plus the binomial series of rho on [64, inf)
HIGH_PRECISION_RHO_POWER = {
    (0.3, 2): 0.41493176624813949,
    (0.6, 2): 0.87787903500506785,
    (0.2, 3): 0.12806663421667998,
    (0.1, 2): 0.1090245645243878,
    (0.7, 2): 1.8190678427911393,
    (0.3, 4): 0.18083717417264304,
}


@pytest.mark.parametrize("key", sorted(HIGH_PRECISION_RHO_POWER))
def test_integral_rho_power_against_high_precision(key):
    h, k = key
    assert integral_rho_power(h, k) == pytest.approx(HIGH_PRECISION_RHO_POWER[key], rel=1e-8)


def test_integral_rho_power_brownian_anchors():
    assert integral_rho_power(0.5, 2) == pytest.approx(2 / 3, abs=1e-12)
    assert integral_rho_power(0.5, 3) == pytest.approx(1 / 2, abs=1e-12)


@pytest.mark.parametrize("h,k", [(0.75, 2), (0.8, 2), (5 / 6, 3)])
def test_integral_rho_power_divergence(h, k):
    with pytest.raises(DivergenceError, match="1 - 1/"):
        integral_rho_power(h, k)


@pytest.mark.parametrize("h", [0.1, 0.3, 0.5, 0.6, 0.7])
def test_sigma_hat_equals_integral_of_rho_squared(h):
    assert sigma_hat_sq(h) == pytest.approx(integral_rho_power(h, 2), rel=1e-10)


def test_sigma_breve_against_high_precision():
    assert sigma_breve_sq(0.1) == pytest.approx(0.064361219227616812, rel=1e-8)
    assert sigma_breve_sq(0.2) == pytest.approx(0.48990842274361108, rel=1e-8)
    with pytest.raises(DivergenceError):
        sigma_breve_sq(0.3)


@pytest.mark.parametrize("h", [0.1, 0.3, 0.45])
def test_rho_half_line_integral_vanishes_below_half(h):
    closed, quad = rho_half_line_integral(h)
    assert closed == 0.0
    assert abs(quad) < 1e-9


def test_rho_half_line_integral_brownian_and_above():
    assert rho_half_line_integral(0.5)[0] == pytest.approx(0.5)
    assert rho_half_line_integral(0.7)[0] == math.inf


# --- c_kH ------------------------------------------------------------------------------------


def test_c_kH_values():
    assert c_kH(0.8, 2) == pytest.approx(1.92, rel=1e-14)
    assert c_kH(0.9, 2) == pytest.approx(0.81 * 0.64 / (0.8 * 0.6), rel=1e-14)
    assert c_kH(0.75 + 1e-9, 2) > 1e7


@pytest.mark.parametrize("h,k", [(0.75, 2), (0.6, 2), (0.8, 3)])
def test_c_kH_requires_hermite_regime(h, k):
    with pytest.raises(DomainError):
        c_kH(h, k)


# --- regimes and predictions ------------------------------------------------------------

REGIME_TABLE = {
    "hermite2": (FunctionalKind.hermite(2), 0.75),
    "hermite3": (FunctionalKind.hermite(3), 5 / 6),
    "tilde": (TILDE, 0.5),
    "breve": (BREVE, 0.25),
    "hat": (HAT, 0.75),
}


@pytest.mark.parametrize("name", sorted(REGIME_TABLE))
@pytest.mark.parametrize("h", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_regime_boundaries_table(name, h):
    kind, threshold = REGIME_TABLE[name]
    regime, exponent = classify_regime(kind, h)
    if h < threshold:
        assert regime is Regime.GAUSSIAN_CLT
        assert exponent > 0 or kind.name == "breve"
    elif h > threshold or kind.name == "tilde":
        assert regime is Regime.L2_LIMIT
    else:
        assert regime is Regime.CRITICAL_LOG and exponent == "log"


def test_normalization_exponents():
    assert classify_regime(FunctionalKind.hermite(2), 0.3)[1] == pytest.approx(0.9)
    assert classify_regime(TILDE, 0.3)[1] == pytest.approx(0.2)
    assert classify_regime(BREVE, 0.2)[1] == pytest.approx(0.1)
    assert classify_regime(HAT, 0.5)[1] == pytest.approx(0.5)


def test_limit_prediction_examples():
    p = limit_prediction(FunctionalKind.hermite(2), 0.8, T=1.0)
    assert p.regime is Regime.L2_LIMIT
    assert p.limit_constant == pytest.approx(1.92)
    assert p.t_exponent == pytest.approx(1.2)
    assert p.extras["second_moment_limit"] == pytest.approx(3.84)
    p = limit_prediction(HAT, 0.75, T=1.0)
    assert p.regime is Regime.CRITICAL_LOG and p.limit_constant == pytest.approx(9 / 32)
    p = limit_prediction(BREVE, 0.5, T=1.0)
    assert p.regime is Regime.L2_LIMIT and p.limit_constant == pytest.approx(0.5, rel=1e-10)
    p = limit_prediction(TILDE, 0.5, T=1.0)
    assert p.limit_constant == pytest.approx(0.5, rel=1e-10)


def test_limit_prediction_scales_with_T():
    a = limit_prediction(FunctionalKind.hermite(2), 0.3, T=1.0).limit_constant
    b = limit_prediction(FunctionalKind.hermite(2), 0.3, T=2.5).limit_constant
    assert b == pytest.approx(2.5 * a)
    a = limit_prediction(FunctionalKind.hermite(3), 0.9, T=1.0).limit_constant
    b = limit_prediction(FunctionalKind.hermite(3), 0.9, T=2.0).limit_constant
    assert b / a == pytest.approx(2.0 ** ((2 * 0.9 - 2) * 3 + 2))


def test_critical_constants_ratio_is_exactly_half():
    hv = limit_prediction(FunctionalKind.hermite(2), 0.75).limit_constant
    hat = limit_prediction(HAT, 0.75).limit_constant
    assert hv == 9 / 16
    assert hat / hv == 0.5


@pytest.mark.parametrize("kind,h", [(FunctionalKind.hermite(2), 0.4), (HAT, 0.8), (BREVE, 0.6),
                                    (TILDE, 0.7), (BREVE, 0.1), (FunctionalKind.hermite(3), 0.2)])
def test_limit_constants_nonnegative(kind, h):
    assert limit_prediction(kind, h).limit_constant >= 0


def test_bivariate_l2_moments_agree_for_tilde_and_breve():
    for h in (0.55, 0.7, 0.9):
        t = limit_prediction(TILDE, h, T=1.3)
        b = limit_prediction(BREVE, h, T=1.3)
        assert t.limit_constant == pytest.approx(b.limit_constant, rel=1e-9)
        assert t.extras["closed_form"] == pytest.approx(t.limit_constant, rel=1e-9)


def test_limit_prediction_rejects_bad_input():
    with pytest.raises(DomainError):
        limit_prediction(HAT, 0.3, T=0.0)
    with pytest.raises(DomainError):
        FunctionalKind.hermite(1)
    with pytest.raises(DomainError):
        FunctionalKind("quartic")


def test_limit_prediction_regime_error_is_a_value_error():
    assert issubclass(RegimeError, ValueError)


# --- exact second moments -----------------------------------------------------------------


def _lag_sum_moment(kind, h, T, eps, m):
    """Exact second moment of the left-endpoint Riemann sum (mesh eps/m) by lag sums."""
    delta = eps / m
    N = int(round(T / delta))
    d = np.arange(-(N - 1), N)
    r = rho_direct(h, d * delta / eps)
    weights = (N - np.abs(d)).astype(float)
    if kind.name == "hermite":
        k = kind.k
        return delta ** 2 * eps ** (-2 * k * (1 - h)) * math.factorial(k) * math.fsum(weights * r ** k)
    return delta ** 2 * eps ** (4 * h - 4) * math.fsum(weights * r ** 2)


def _matrix_moment(kind, h, T, eps, m):
    """Exact second moment of the Riemann-sum Tilde or Breve functional (dense covariances)."""
    delta = eps / m
    N = int(round(T / delta))
    i = np.arange(N)
    C = eps ** (2 * h) * rho_direct(h, (i[:, None] - i[None, :]) * delta / eps)
    if kind.name == "tilde":
        u = i * delta
        R = 0.5 * (u[:, None] ** (2 * h) + u[None, :] ** (2 * h) - np.abs(u[:, None] - u[None, :]) ** (2 * h))
        return delta ** 2 / eps ** 2 * np.sum(R * C)
    P = np.zeros((N + 1, N + 1))
    P[1:, 1:] = np.cumsum(np.cumsum(C, 0), 1)
    return delta ** 4 / eps ** 4 * np.sum(P[:N, :N] * C)


@pytest.mark.parametrize("kind", [FunctionalKind.hermite(2), FunctionalKind.hermite(3), HAT],
                         ids=lambda k: k.label)
@pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
def test_second_moment_exact_against_fine_lag_sums(kind, h):
    eps = 0.125
    oracle = _lag_sum_moment(kind, h, 1.0, eps, 4096)
    assert second_moment_exact(kind, h, T=1.0, eps=eps) == pytest.approx(oracle, rel=2e-4)


@pytest.mark.parametrize("kind", [TILDE, BREVE], ids=lambda k: k.label)
@pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
def test_second_moment_exact_against_extrapolated_matrix_sums(kind, h):
    eps = 0.125
    coarse = _matrix_moment(kind, h, 1.0, eps, 64)
    fine = _matrix_moment(kind, h, 1.0, eps, 128)
    assert second_moment_exact(kind, h, T=1.0, eps=eps) == pytest.approx(2 * fine - coarse, rel=5e-4)


def _cov_scalar(h, eps, eta, x):
    p = 2 * h
    return 0.5 * (abs(x + eps) ** p + abs(x - eta) ** p - abs(x) ** p - abs(x + (eps - eta)) ** p)


@pytest.mark.parametrize("h", [0.3, 0.6])
def test_hat_moment_two_dimensional_quadrature(h):
    eps, eta, T = 0.3, 0.2, 1.0

    def inner(u):
        kinks = sorted({min(max(u + s, 0.0), T) for s in (0.0, eps, -eta, eps - eta)})
        f = lambda v: _cov_scalar(h, eps, eta, u - v) ** 2
        return integrate.quad(f, 0, T, points=kinks, epsabs=1e-13, epsrel=1e-11, limit=200)[0]

    outer_kinks = [eps, eta, eps - eta, T - eps, T - eta, T - (eps - eta)]
    direct = integrate.quad(inner, 0, T, epsabs=1e-12, epsrel=1e-10, limit=200,
                            points=sorted(set(outer_kinks)))[0] / (eps * eta) ** 2
    assert second_moment_exact(HAT, h, T=T, eps=eps, eta=eta) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_breve_block_closed_form_against_quadrature(h):
    eps, eta = 0.15, 0.1
    lag = _LagFunctions(h, eps, eta)
    for u, v in [(0.4, 0.7), (0.9, 0.2), (0.5, 0.5)]:
        # integrate cov(s - s') over the rectangle through the overlap length of each diagonal
        overlap = lambda x: max(0.0, min(u, v + x) - max(0.0, x))
        f = lambda x: _cov_scalar(h, eps, eta, x) * overlap(x)
        kinks = sorted({0.0, -eps, eta, eta - eps, u - v})
        brute = integrate.quad(f, -v, u, points=[k for k in kinks if -v < k < u],
                               epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        assert float(lag.block(np.array([u]), np.array([v]))[0]) == pytest.approx(brute, rel=1e-9)


def test_second_moment_symmetric_in_lags():
    a = second_moment_exact(FunctionalKind.hermite(2), 0.4, T=1.0, eps=0.1, eta=0.05)
    b = second_moment_exact(FunctionalKind.hermite(2), 0.4, T=1.0, eps=0.05, eta=0.1)
    assert a == pytest.approx(b, rel=1e-10)


def test_breve_brownian_moment_tends_to_half():
    values = [second_moment_exact(BREVE, 0.5, T=1.0, eps=2.0 ** -j) for j in (4, 6, 8, 10)]
    gaps = [abs(v - 0.5) for v in values]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_hermite_moment_cauchy_differences_shrink():
    values = [second_moment_exact(FunctionalKind.hermite(2), 0.8, T=1.0, eps=2.0 ** -j)
              for j in range(4, 11)]
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_second_moment_exact_rejects_bad_lags():
    with pytest.raises(DomainError):
        second_moment_exact(HAT, 0.3, eps=0.0)
    with pytest.raises(DomainError):
        second_moment_exact(HAT, 0.3, eps=0.1, eta=-1.0)
