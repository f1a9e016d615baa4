import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from hermite_limits import mc_lab
from hermite_limits.core_math import BREVE, HAT, TILDE, FunctionalKind, second_moment_exact
from hermite_limits.errors import ConfigError, DomainError, RegimeError
from hermite_limits.path_engine import make_rng

HERMITE2 = FunctionalKind.hermite(2)


# -- parsing ------------------------------------------------------------------


@pytest.mark.parametrize("text, value", [("2^-8", 2.0 ** -8), ("2^(-3)", 0.125), (" 2 ^ -1 ", 0.5),
                                         ("0.25", 0.25), (0.5, 0.5)])
def test_parse_eps(text, value):
    assert mc_lab.parse_eps(text) == value


@pytest.mark.parametrize("text", ["2^", "abc", "-0.1", "0", "inf"])
def test_parse_eps_rejects(text):
    with pytest.raises(ConfigError):
        mc_lab.parse_eps(text)


def test_parse_eps_list():
    assert mc_lab.parse_eps_list("2^-6,2^-8") == [2.0 ** -6, 2.0 ** -8]
    assert mc_lab.parse_eps_list(["2^-1", 0.25]) == [0.5, 0.25]


def test_worker_count_respects_cap(monkeypatch):
    monkeypatch.setenv(mc_lab.THREADS_ENV, "1")
    assert mc_lab.worker_count() == 1
    monkeypatch.setenv(mc_lab.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        mc_lab.worker_count()


# -- KS test --------------------------------------------------------------------


def test_ks_three_point_sample():
    result = mc_lab.ks_normal_test([-1.0, 0.0, 1.0], 1.0)
    assert result.statistic == pytest.approx(0.1747, abs=5e-5)
    # the largest gap sits just below x = 1, where the empirical CDF is 2/3
    assert result.statistic == pytest.approx(special.ndtr(1.0) - 2 / 3, rel=1e-12)
    assert result.p_value == pytest.approx(stats.kstwobign.sf(math.sqrt(3) * result.statistic),
                                           rel=1e-10)
    assert result.n == 3 and result.flagged


@pytest.mark.parametrize("lam", [0.2, 0.5, 0.8, 0.99, 1.0, 1.3, 2.0, 3.5])
def test_kolmogorov_tail_matches_scipy(lam):
    assert mc_lab.kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), rel=1e-10, abs=1e-15)


def test_kolmogorov_tail_edges():
    assert mc_lab.kolmogorov_sf(0.0) == 1.0
    assert mc_lab.kolmogorov_sf(0.05) == 1.0
    assert 0.0 <= mc_lab.kolmogorov_sf(10.0) < 1e-80


def test_ks_matches_scipy_statistic():
    x = make_rng(5).normal(0.0, 2.0, 500)
    ours = mc_lab.ks_normal_test(x, 4.0)
    ref = stats.kstest(x, "norm", args=(0, 2.0))
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p_value == pytest.approx(stats.kstwobign.sf(math.sqrt(500) * ref.statistic), rel=1e-9)


def test_ks_input_errors():
    with pytest.raises(DomainError):
        mc_lab.ks_normal_test([], 1.0)
    with pytest.raises(DomainError):
        mc_lab.ks_normal_test([0.1, 0.2], 0.0)
    with pytest.raises(DomainError):
        mc_lab.ks_normal_test([0.1, float("nan")], 1.0)


def test_ks_level_under_the_null():
    passes = 0
    for rep in range(100):
        x = make_rng(mc_lab.mix64(2718, rep)).normal(0.0, 1.5, 10_000)
        passes += mc_lab.ks_normal_test(x, 2.25).p_value > 0.01
    assert passes >= 98


def test_ks_detects_wrong_variance():
    x = make_rng(9).normal(0.0, 1.2, 10_000)
    assert mc_lab.ks_normal_test(x, 1.0).p_value < 1e-6


# -- regression -----------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(-3, 3))
def test_regression_on_exact_power_law(c, a):
    pts = [(2.0 ** -j, c * 2.0 ** (-j * a)) for j in range(3, 9)]
    fit = mc_lab.variance_scaling_regression(pts)
    assert fit["slope"] == pytest.approx(a, abs=1e-10)
    assert fit["r2"] == pytest.approx(1.0, abs=1e-12)
    assert fit["intercept"] == pytest.approx(math.log(c), abs=1e-9)


def test_regression_input_errors():
    with pytest.raises(DomainError):
        mc_lab.variance_scaling_regression([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(DomainError):
        mc_lab.variance_scaling_regression([(0.1, 1.0), (0.2, -2.0), (0.3, 1.0)])
    with pytest.raises(DomainError):
        mc_lab.variance_scaling_regression([(0.1, 1.0)] * 3)


def test_regression_on_analytic_brownian_hat_variances():
    pts = [(2.0 ** -j, second_moment_exact(HAT, 0.5, T=1.0, eps=2.0 ** -j)) for j in range(4, 9)]
    assert mc_lab.variance_scaling_regression(pts)["slope"] == pytest.approx(-1.0, abs=0.02)


# -- configuration ----------------------------------------------------------------


def test_config_build_lays_out_grid():
    cfg = mc_lab.ExperimentConfig.build(HERMITE2, 0.3, 1.0, ["2^-4", "2^-6"], 200, 1)
    assert cfg.grid.delta == 2.0 ** -10
    assert [e.m for e in cfg.eps_grid] == [64, 16]
    assert cfg.grid.n == 1024 + 64


@pytest.mark.parametrize("kwargs", [
    dict(eps_values=["2^-4"], replicas=99),
    dict(eps_values=["2^-6", "2^-4"], replicas=200),
    dict(eps_values=["2^-4", "2^-4"], replicas=200),
    dict(eps_values=[0.1], replicas=200, delta=2.0 ** -8),
    dict(eps_values=[], replicas=200),
    dict(eps_values=["2^-4"], replicas=200, method="fourier"),
    dict(eps_values=["2^-4"], replicas=200, significance=1.5),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        mc_lab.ExperimentConfig.build(HERMITE2, 0.3, 1.0, base_seed=0, **kwargs)


def test_config_from_dict_round_trip():
    data = {"kind": "hermite", "hurst": 0.3, "k": 3, "T": 1.0, "eps": "2^-4,2^-5", "replicas": 150,
            "seed": 11, "method": "cholesky"}
    cfg = mc_lab.ExperimentConfig.from_dict(data)
    assert cfg.kind == FunctionalKind.hermite(3) and cfg.base_seed == 11
    again = cfg.to_dict()
    assert again["eps"] == [2.0 ** -4, 2.0 ** -5] and again["method"] == "cholesky"
    with pytest.raises(ConfigError):
        mc_lab.ExperimentConfig.from_dict({**data, "colour": "red"})
    with pytest.raises(ConfigError):
        mc_lab.ExperimentConfig.from_dict({"kind": "hat", "eps": "2^-4"})
    with pytest.raises(ConfigError):
        mc_lab.ExperimentConfig.from_dict({**data, "kind": "wick"})


# -- experiments ------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_report():
    cfg = mc_lab.ExperimentConfig.build(BREVE, 0.6, 1.0, ["2^-3", "2^-4", "2^-5"], 200, 42)
    return mc_lab.run_experiment(cfg)


def test_report_schema(small_report):
    data = json.loads(small_report.to_json())
    assert set(data) == {"config", "per_eps", "prediction", "regression", "verdicts", "wall_time"}
    row = data["per_eps"][0]
    for key in ("mean", "variance", "std_error", "normalized_variance", "ks_statistic", "p_value"):
        assert key in row
    assert all(set(v) == {"criterion", "pass", "detail"} for v in data["verdicts"])
    assert "wall_time" not in json.loads(small_report.to_json(include_timing=False))


def test_reports_are_byte_identical(small_report):
    cfg = small_report.config
    again = mc_lab.run_experiment(cfg, threads=1)
    assert again.to_json(include_timing=False) == small_report.to_json(include_timing=False)
    assert mc_lab.run_experiment(cfg, threads=3).to_json(False) == small_report.to_json(False)


def test_exact_moment_verdicts_pass(small_report):
    moments = [v for v in small_report.verdicts if v.criterion.startswith("second_moment")]
    assert len(moments) == 3 and all(v.passed for v in moments)


def test_samples_csv(small_report, tmp_path):
    target = tmp_path / "s.csv"
    small_report.write_samples_csv(0, target)
    with open(target, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["replica", "seed", "raw", "normalized"]
    assert len(rows) == 200
    block = small_report.samples[0]
    assert int(rows[5]["seed"]) == block.seeds[5] == mc_lab.replica_seed(42, 5, small_report.config.eps_grid[0].m)
    assert float(rows[5]["raw"]) == block.raw[5]


def test_hermite_variance_scaling_from_monte_carlo():
    cfg = mc_lab.ExperimentConfig.build(HERMITE2, 0.3, 1.0, [f"2^-{j}" for j in range(5, 10)], 400, 3)
    report = mc_lab.run_experiment(cfg)
    assert report.regression["slope"] == pytest.approx(-1.8, abs=0.1)
    assert report.regression["expected_slope"] == pytest.approx(-1.8)


# -- contraction ------------------------------------------------------------------

TRIANGLE_SELF_CONVOLUTION_SQ = 151 / 315  # squared norm of the cubic B-spline


def test_contraction_brownian_triangle_exact_value():
    est = mc_lab.contraction_norm_bound(0.5, 2, 1, 1.0, 0.125, mc_points=2_000_000, seed=4)
    exact = 0.125 * TRIANGLE_SELF_CONVOLUTION_SQ
    assert abs(est.value - exact) < 3 * est.std_error
    assert not est.flagged


@pytest.mark.slow
def test_contraction_independent_runs_agree():
    a = mc_lab.contraction_norm_bound(0.5, 2, 1, 1.0, 0.125, mc_points=10 ** 7, seed=1)
    b = mc_lab.contraction_norm_bound(0.5, 2, 1, 1.0, 0.125, mc_points=10 ** 7, seed=2)
    assert abs(a.value - b.value) < 3 * math.hypot(a.std_error, b.std_error)


def test_contraction_is_deterministic_and_flags_noisy_estimates():
    a = mc_lab.contraction_norm_bound(0.6, 2, 1, 1.0, 2.0 ** -6, mc_points=1000, seed=3)
    b = mc_lab.contraction_norm_bound(0.6, 2, 1, 1.0, 2.0 ** -6, mc_points=1000, seed=3)
    assert a == b
    assert a.flagged


def test_contraction_argument_checks():
    with pytest.raises(RegimeError):
        mc_lab.contraction_norm_bound(0.8, 2, 1, 1.0, 0.1)
    with pytest.raises(DomainError):
        mc_lab.contraction_norm_bound(0.3, 2, 2, 1.0, 0.1)
    with pytest.raises(DomainError):
        mc_lab.contraction_norm_bound(0.3, 2, 1, 1.0, 0.1, mc_points=1)


# -- characteristic functions ------------------------------------------------------


def test_empirical_cf_at_zero_is_one():
    cf, se = mc_lab.empirical_cf(make_rng(1).normal(size=1000), 0.0)
    assert cf == 1.0 and se == 0.0


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.5])
def test_empirical_cf_of_gaussian_draws(lam):
    sigma2 = 0.7
    x = make_rng(mc_lab.mix64(8, int(lam * 10))).normal(0.0, math.sqrt(sigma2), 20_000)
    cf, se = mc_lab.empirical_cf(x, lam)
    assert abs(cf - math.exp(-0.5 * lam ** 2 * sigma2)) < 3 * se


def test_mixed_limit_report_columns():
    report = mc_lab.mixed_limit_cf_test(0.3, 1.0, 2.0 ** -9, [0.0, 0.5, 1.0, 2.0], 300, base_seed=5)
    assert [r["lambda"] for r in report.rows] == [0.0, 0.5, 1.0, 2.0]
    for row in report.rows:
        assert set(row) == {"lambda", "empirical_cf", "empirical_se", "printed_target",
                            "printed_target_se"}
        assert -1 <= row["empirical_cf"] <= 1
    assert report.rows[0]["empirical_cf"] == 1.0
    # the half-line integral of the covariance vanishes, so the nominal target is identically one
    assert report.half_line_integral == pytest.approx(0.0, abs=1e-12)
    assert all(r["printed_target"] == pytest.approx(1.0, abs=1e-12) for r in report.rows)
    assert json.loads(mc_lab.dumps(report.to_dict()))["rows"][1]["lambda"] == 0.5


def test_mixed_limit_needs_small_hurst():
    with pytest.raises(RegimeError):
        mc_lab.mixed_limit_cf_test(0.5, 1.0, 2.0 ** -4, [1.0], 10)


def test_dumps_handles_non_finite_and_numpy_scalars():
    text = mc_lab.dumps({"a": np.float64(0.1), "b": float("inf"), "c": np.int64(3), "d": TILDE.label})
    assert text == '{"a":0.1,"b":"inf","c":3,"d":"Tilde"}'
