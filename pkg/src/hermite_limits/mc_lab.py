"""Monte Carlo experiments, distributional tests and scaling checks.

Every random quantity is derived from a 64-bit base seed through :func:`mix64`,
so reports are pure functions of their configuration.  Replicas run on a
thread pool in fixed-size chunks; results land in preallocated slots and all
reductions use ``math.fsum`` over the slot order, which makes the output
independent of scheduling.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core_math import (FunctionalKind, Regime, as_hurst, limit_prediction, rho,
                        rho_half_line_integral, second_moment_exact)
from .errors import ConfigError, DomainError, RegimeError
from .functionals import TILDE, EpsSpec, Normalization, raw_values, row_fsum
from .path_engine import (GridSpec, Method, cumulate, generate_fgn_batch, make_rng, mix64,
                          pair_seeds)

log = logging.getLogger(__name__)

THREADS_ENV = "HERMITE_LIMITS_THREADS"
MIN_REPLICAS = 100
DISTRIBUTIONAL_REPLICAS = 2000
KS_SERIES_TERMS = 100
CHUNK = 256
SE_MULTIPLE = 3.0
CONTRACTION_SE_TARGET = 0.05

# stream tags separating the random streams of different experiment parts
_CONTRACTION_TAG = 0xC0
_CF_SAMPLE_TAG = 0xCF
_CF_TARGET_TAG = 0xCE

_EPS_POWER = re.compile(r"^\s*2\s*\^\s*\(?\s*(-?\d+)\s*\)?\s*$")


def parse_eps(text) -> float:
    """Parse a lag such as ``2^-8`` (also ``2^(-8)``) or a plain decimal."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        match = _EPS_POWER.match(str(text))
        if match:
            value = 2.0 ** int(match.group(1))
        else:
            try:
                value = float(text)
            except ValueError:
                raise ConfigError(f"cannot parse lag {text!r}; use 2^-k or a decimal") from None
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"lag must be positive and finite, got {text!r}")
    return value


def parse_eps_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [parse_eps(v) for v in text]
    return [parse_eps(v) for v in str(text).split(",") if v.strip()]


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def _mean_var(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = math.fsum(x.tolist()) / n
    var = math.fsum(((x - mean) ** 2).tolist()) / (n - 1) if n > 1 else 0.0
    return mean, var


# ---------------------------------------------------------------------------
# Configuration and report


@dataclass(frozen=True)
class ExperimentConfig:
    kind: FunctionalKind
    H: float
    T: float
    eps_grid: tuple
    replicas: int
    base_seed: int
    grid: GridSpec
    method: Method = Method.CIRCULANT
    significance: float = 0.01
    exact_check: bool = True
    variance_tolerance: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "H", as_hurst(self.H))
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "eps_grid", tuple(self.eps_grid))
        if int(self.replicas) != self.replicas or self.replicas < MIN_REPLICAS:
            raise ConfigError(f"need at least {MIN_REPLICAS} replicas, got {self.replicas!r}")
        if not 0 < self.significance < 1:
            raise ConfigError(f"significance must lie in (0, 1), got {self.significance!r}")
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T!r}")
        if not self.eps_grid:
            raise ConfigError("eps grid is empty")
        for e in self.eps_grid:
            if not isinstance(e, EpsSpec) or abs(e.delta - self.grid.delta) > 1e-15 * self.grid.delta:
                raise ConfigError("every lag must be an EpsSpec on the experiment mesh")
        ms = [e.m for e in self.eps_grid]
        if any(a <= b for a, b in zip(ms, ms[1:])):
            raise ConfigError("eps grid must be strictly decreasing")
        horizon = self.grid.steps(self.T, "horizon T")
        if horizon + ms[0] > self.grid.n:
            raise ConfigError("grid does not cover T plus the largest lag")

    @property
    def k(self) -> int:
        return self.kind.k

    @classmethod
    def build(cls, kind: FunctionalKind, H, T: float, eps_values, replicas: int, base_seed: int,
              delta: float | None = None, method=Method.CIRCULANT, **options) -> "ExperimentConfig":
        """Lay out the grid from the lags: mesh defaults to the smallest lag / 16."""
        eps_values = [parse_eps(e) for e in eps_values]
        if not eps_values:
            raise ConfigError("eps grid is empty")
        delta = min(eps_values) / 16 if delta is None else parse_eps(delta)
        grid = GridSpec.covering(T, max(eps_values), delta)
        try:
            eps_grid = tuple(EpsSpec.from_eps(e, grid) for e in eps_values)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            method = Method(str(getattr(method, "value", method)).lower())
        except ValueError:
            raise ConfigError(f"unknown generation method {method!r}") from None
        return cls(kind, H, float(T), eps_grid, int(replicas), int(base_seed), grid, method, **options)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"kind", "hurst", "H", "k", "T", "eps", "replicas", "seed", "base_seed", "delta",
                 "method", "significance", "exact_check", "variance_tolerance"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kind = kind_from_name(data["kind"], data.get("k"))
            H = data["hurst"] if "hurst" in data else data["H"]
            eps = parse_eps_list(data["eps"])
            replicas = data["replicas"]
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc.args[0]!r}") from None
        seed = data.get("base_seed", data.get("seed", 0))
        options = {key: data[key] for key in ("significance", "exact_check", "variance_tolerance")
                   if key in data}
        return cls.build(kind, H, data.get("T", 1.0), eps, replicas, seed, data.get("delta"),
                         data.get("method", "circulant"), **options)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.label,
            "hurst": self.H,
            "k": self.k,
            "T": self.T,
            "eps": [e.eps for e in self.eps_grid],
            "eps_steps": [e.m for e in self.eps_grid],
            "delta": self.grid.delta,
            "n": self.grid.n,
            "replicas": self.replicas,
            "base_seed": self.base_seed,
            "method": self.method.value,
            "significance": self.significance,
            "exact_check": self.exact_check,
            "variance_tolerance": self.variance_tolerance,
        }


def kind_from_name(name: str, k=None) -> FunctionalKind:
    text = str(name).strip().lower()
    aliases = {"hermitevariation": "hermite", "hv": "hermite"}
    text = aliases.get(text, text)
    if text == "hermite":
        return FunctionalKind.hermite(2 if k is None else int(k))
    if text not in ("tilde", "breve", "hat"):
        raise ConfigError(f"unknown functional kind {name!r}")
    return FunctionalKind(text)


@dataclass(frozen=True)
class StatTestResult:
    statistic: float
    p_value: float
    n: int
    flagged: bool = False

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "n": self.n,
                "flagged": self.flagged}


@dataclass
class Verdict:
    criterion: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "pass": self.passed, "detail": self.detail}


@dataclass
class EpsSamples:
    eps: float
    seeds: list
    raw: np.ndarray
    normalized: np.ndarray


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    per_eps: list
    prediction: dict
    regression: dict | None
    verdicts: list
    wall_time: float
    samples: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "config": self.config.to_dict(),
            "per_eps": self.per_eps,
            "prediction": self.prediction,
            "regression": self.regression,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return dumps(self.to_dict(include_timing))

    def write_samples_csv(self, index: int, target) -> None:
        block = self.samples[index]
        with open(target, "w", encoding="ascii", newline="") as fh:
            fh.write("replica,seed,raw,normalized\n")
            for i, (s, r, v) in enumerate(zip(block.seeds, block.raw.tolist(), block.normalized.tolist())):
                fh.write(f"{i},{s},{r!r},{v!r}\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    """Compact JSON; floats use the shortest repr that round-trips, non-finite become strings."""
    return json.dumps(_clean(obj), separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# Replica evaluation


def replica_seed(base_seed: int, replica: int, stream_tag: int) -> int:
    return mix64(base_seed, replica, stream_tag)


def _evaluate_chunk(kind, h, grid, method, seeds, T, eps_spec):
    if kind.is_bivariate:
        firsts, seconds = zip(*(pair_seeds(s) for s in seeds))
        v1 = cumulate(generate_fgn_batch(h, grid, firsts, method))
        v2 = cumulate(generate_fgn_batch(h, grid, seconds, method))
        return raw_values(kind, h, grid, v1, v2, T, eps_spec)
    values = cumulate(generate_fgn_batch(h, grid, seeds, method))
    return raw_values(kind, h, grid, values, None, T, eps_spec)


def simulate_raw(kind: FunctionalKind, H, grid: GridSpec, method, seeds, T: float,
                 eps_spec: EpsSpec, threads: int | None = None) -> np.ndarray:
    """Raw functional values, one per seed, evaluated on a thread pool."""
    h = as_hurst(H)
    seeds = list(seeds)
    out = np.empty(len(seeds))
    starts = range(0, len(seeds), CHUNK)

    def task(start):
        out[start:start + CHUNK] = _evaluate_chunk(kind, h, grid, method, seeds[start:start + CHUNK],
                                                   T, eps_spec)

    threads = worker_count() if threads is None else threads
    if threads == 1 or len(seeds) <= CHUNK:
        for s in starts:
            task(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(task, starts))
    return out


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    start = time.perf_counter()
    kind, h, T = config.kind, config.H, config.T
    prediction = limit_prediction(kind, h, T=T)
    norm = Normalization.for_kind(kind, h)
    constant = prediction.limit_constant
    per_eps, samples, verdicts = [], [], []

    for spec in config.eps_grid:
        eps = spec.eps
        seeds = [replica_seed(config.base_seed, i, spec.m) for i in range(config.replicas)]
        raw = simulate_raw(kind, h, config.grid, config.method, seeds, T, spec, threads)
        if not np.all(np.isfinite(raw)):
            raise DomainError(f"{kind.label} produced non-finite values at eps = {eps!r}")
        normalized = norm.apply(raw, eps)
        samples.append(EpsSamples(eps, seeds, raw, normalized))

        n = config.replicas
        mean, var = _mean_var(raw)
        m2 = math.fsum((raw ** 2).tolist()) / n
        _, var_sq = _mean_var(raw ** 2)
        _, nvar = _mean_var(normalized)
        _, nvar_sq = _mean_var((normalized - normalized.mean()) ** 2)
        row = {
            "eps": eps,
            "mean": mean,
            "variance": var,
            "std_error": math.sqrt(var / n),
            "second_moment": m2,
            "second_moment_se": math.sqrt(var_sq / n),
            "normalized_variance": nvar,
            "normalized_variance_se": math.sqrt(nvar_sq / n),
            "ks_statistic": None,
            "p_value": None,
        }
        if prediction.regime in (Regime.GAUSSIAN_CLT, Regime.CRITICAL_LOG) and constant > 0:
            ks = ks_normal_test(normalized, constant)
            row["ks_statistic"], row["p_value"] = ks.statistic, ks.p_value
        if config.exact_check:
            exact = second_moment_exact(kind, h, T=T, eps=eps)
            row["exact_second_moment"] = exact
            gap = abs(m2 - exact)
            verdicts.append(Verdict(
                f"second_moment[eps={eps!r}]", gap <= SE_MULTIPLE * row["second_moment_se"],
                f"MC {m2!r} vs exact {exact!r}, |gap| = {gap / row['second_moment_se']:.3g} SE"))
        per_eps.append(row)

    verdicts.extend(_limit_verdicts(config, prediction, per_eps))

    regression = None
    if len(per_eps) >= 3:
        regression = variance_scaling_regression([(r["eps"], r["variance"]) for r in per_eps])
        if norm.mode == "power":
            regression["expected_slope"] = -2 * norm.exponent

    return ExperimentReport(config, per_eps, prediction.to_dict(), regression, verdicts,
                            time.perf_counter() - start, samples)


def _limit_verdicts(config: ExperimentConfig, prediction, per_eps: list) -> list:
    out = []
    constant = prediction.limit_constant
    last = per_eps[-1]
    regime = prediction.regime
    if regime is Regime.CRITICAL_LOG:
        if len(per_eps) >= 2:
            gaps = [abs(r["normalized_variance"] - constant) for r in per_eps]
            ok = all(b <= a + 2 * r["normalized_variance_se"]
                     for a, b, r in zip(gaps, gaps[1:], per_eps[1:]))
            out.append(Verdict("log_trend", ok,
                               "distance of Var/log(1/eps) to the constant, by decreasing eps: "
                               + ", ".join(f"{g:.4g}" for g in gaps)))
        return out
    if not constant > 0:
        return out
    rel = abs(last["normalized_variance"] - constant) / constant
    out.append(Verdict("limit_variance", rel <= config.variance_tolerance,
                       f"normalized variance {last['normalized_variance']!r} vs {constant!r} "
                       f"(relative gap {rel:.3g}, tolerance {config.variance_tolerance:g})"))
    if (regime is Regime.GAUSSIAN_CLT and config.replicas >= DISTRIBUTIONAL_REPLICAS
            and last["p_value"] is not None):
        out.append(Verdict("ks_normal", last["p_value"] > config.significance,
                           f"D = {last['ks_statistic']:.4g}, p = {last['p_value']:.4g} "
                           f"at eps = {last['eps']!r}"))
    return out


# ---------------------------------------------------------------------------
# Statistics


def kolmogorov_sf(lam: float, terms: int = KS_SERIES_TERMS) -> float:
    """P(sup |Brownian bridge| > lam), the limiting Kolmogorov tail.

    For lam >= 1 the alternating series 2 sum (-1)^{j-1} exp(-2 j^2 lam^2)
    converges immediately; below 1 the equivalent theta-function form
    1 - sqrt(2 pi)/lam sum exp(-(2j-1)^2 pi^2 / (8 lam^2)) is used.
    """
    if lam <= 0:
        return 1.0
    j = np.arange(1, terms + 1, dtype=float)
    if lam >= 1.0:
        signs = np.where(j % 2 == 1, 1.0, -1.0)
        p = 2.0 * math.fsum((signs * np.exp(-2.0 * j ** 2 * lam ** 2)).tolist())
    else:
        odd = 2 * j - 1
        p = 1.0 - math.sqrt(2 * math.pi) / lam * math.fsum(
            np.exp(-odd ** 2 * math.pi ** 2 / (8 * lam ** 2)).tolist())
    return min(1.0, max(0.0, p))


def ks_normal_test(samples, sigma2: float) -> StatTestResult:
    """One-sample KS test of ``samples`` against N(0, sigma2), asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DomainError("KS test needs at least one sample")
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise DomainError(f"variance must be positive, got {sigma2!r}")
    if not np.all(np.isfinite(x)):
        raise DomainError("KS samples contain non-finite values")
    cdf = special.ndtr(x / math.sqrt(sigma2))
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return StatTestResult(d, kolmogorov_sf(math.sqrt(n) * d), int(n), n < MIN_REPLICAS)


def variance_scaling_regression(points) -> dict:
    """OLS of log(variance) on log(eps): slope, intercept and r^2."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise DomainError(f"regression needs at least 3 points, got {len(pts)}")
    if any(not (e > 0 and v > 0) for e, v in pts):
        raise DomainError("regression points must be positive")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise DomainError("regression needs at least two distinct lags")
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    # residuals at rounding level mean an exact fit, even when y is (nearly) constant
    exact = ss_res <= (64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(y))))) ** 2 * len(y)
    r2 = 1.0 if exact or ss_tot == 0 else 1.0 - ss_res / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "points": len(pts)}


# ---------------------------------------------------------------------------
# Contraction bound


@dataclass(frozen=True)
class ContractionEstimate:
    eps: float
    value: float
    std_error: float
    points: int
    flagged: bool

    def to_dict(self) -> dict:
        return {"eps": self.eps, "value": self.value, "std_error": self.std_error,
                "points": self.points, "flagged": self.flagged}


class _PowerTailSampler:
    """Symmetric density proportional to (1 + |u|)^-a on [-L, L], sampled by inversion."""

    def __init__(self, a: float, L: float):
        self.a, self.L = a, L
        self.mass = self._primitive(L)

    def _primitive(self, x):
        if abs(self.a - 1) < 1e-12:
            return np.log1p(x)
        return (np.power(1 + x, 1 - self.a) - 1) / (1 - self.a)

    def _inverse(self, y):
        if abs(self.a - 1) < 1e-12:
            return np.expm1(y)
        return np.power(1 + (1 - self.a) * y, 1 / (1 - self.a)) - 1

    def sample(self, rng, size):
        u = rng.random(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * np.minimum(self._inverse(u * self.mass), self.L)

    def density(self, x):
        return np.power(1 + np.abs(x), -self.a) / (2 * self.mass)


def contraction_norm_bound(H, k: int, r: int, T: float, eps: float, mc_points: int = 200_000,
                           seed: int = 0, chunk: int = 1 << 16) -> ContractionEstimate:
    """Importance-sampled eps * integral over [-T/eps, T/eps]^3 of
    |rho(x)|^r |rho(y)|^r |rho(z)|^{k-r} |rho(y+z-x)|^{k-r}.

    Points are drawn in blocks of ``chunk``, so the estimate is reproducible for
    fixed (seed, chunk).
    """
    h = as_hurst(H)
    if int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")
    if int(r) != r or not 1 <= r <= k - 1:
        raise DomainError(f"r must satisfy 1 <= r <= k-1, got {r!r}")
    threshold = 1 - 1 / (2 * k)
    if h >= threshold:
        raise RegimeError(f"contraction decay is only asserted for H < {threshold:.6g}, got {h!r}")
    if not (T > 0 and eps > 0):
        raise DomainError("T and eps must be positive")
    if int(mc_points) != mc_points or mc_points < 2:
        raise DomainError(f"need at least 2 sample points, got {mc_points!r}")
    L = T / eps
    decay = (2 - 2 * h) * min(r, k - r)
    sampler = _PowerTailSampler(min(decay, 0.95), L)
    rng = make_rng(mix64(seed, _CONTRACTION_TAG, int(k), int(r)))
    total = total_sq = 0.0
    sums, sq_sums = [], []
    done = 0
    while done < mc_points:
        size = min(chunk, mc_points - done)
        x, y, z = (sampler.sample(rng, size) for _ in range(3))
        f = (np.abs(rho(h, x)) ** r * np.abs(rho(h, y)) ** r * np.abs(rho(h, z)) ** (k - r)
             * np.abs(rho(h, y + z - x)) ** (k - r))
        w = f / (sampler.density(x) * sampler.density(y) * sampler.density(z))
        sums.append(math.fsum(w.tolist()))
        sq_sums.append(math.fsum((w * w).tolist()))
        done += size
    total = math.fsum(sums)
    total_sq = math.fsum(sq_sums)
    mean = total / mc_points
    var = max(total_sq / mc_points - mean ** 2, 0.0) * mc_points / (mc_points - 1)
    value = eps * mean
    se = eps * math.sqrt(var / mc_points)
    flagged = not se <= CONTRACTION_SE_TARGET * abs(value)
    if flagged:
        log.warning("contraction estimate at eps=%g has SE %.3g (> %.0f%% of %.3g)", eps, se,
                    100 * CONTRACTION_SE_TARGET, value)
    return ContractionEstimate(float(eps), float(value), float(se), int(mc_points), flagged)


# ---------------------------------------------------------------------------
# Mixed Gaussian limit of the Tilde functional


@dataclass
class MixedLimitReport:
    H: float
    T: float
    eps: float
    replicas: int
    half_line_integral: float
    normalized_variance: float
    rows: list

    def to_dict(self) -> dict:
        return {"hurst": self.H, "T": self.T, "eps": self.eps, "replicas": self.replicas,
                "half_line_integral": self.half_line_integral,
                "normalized_variance": self.normalized_variance, "rows": self.rows}


def empirical_cf(samples, lam: float) -> tuple[float, float]:
    """Mean of cos(lam * X) and its standard error."""
    c = np.cos(lam * np.asarray(samples, dtype=float))
    mean, var = _mean_var(c)
    return mean, math.sqrt(var / c.size)


def mixed_limit_cf_test(H, T: float, eps: float, lambdas, replicas: int, base_seed: int = 0,
                        delta: float | None = None, method=Method.CIRCULANT,
                        threads: int | None = None) -> MixedLimitReport:
    """Empirical CF of eps^{1/2-H} times the Tilde functional, next to the nominal
    mixed-Gaussian target E exp(-lam^2 S^2 / 2) with S^2 = 2 int_0^inf rho * int_0^T B_u^2 du."""
    h = as_hurst(H)
    if h >= 0.5:
        raise RegimeError(f"mixed Gaussian limit needs H < 1/2, got {h!r}")
    if int(replicas) != replicas or replicas < 2:
        raise DomainError(f"need at least 2 replicas, got {replicas!r}")
    lambdas = [float(v) for v in lambdas]
    if not all(math.isfinite(v) for v in lambdas):
        raise DomainError("lambda grid must be finite")
    delta = eps / 8 if delta is None else delta
    grid = GridSpec.covering(T, eps, delta)
    spec = EpsSpec.from_eps(eps, grid)
    method = Method(getattr(method, "value", method))

    seeds = [replica_seed(base_seed, i, _CF_SAMPLE_TAG) for i in range(replicas)]
    raw = simulate_raw(TILDE, h, grid, method, seeds, T, spec, threads)
    normalized = raw * spec.eps ** (0.5 - h)
    _, nvar = _mean_var(normalized)

    closed, _ = rho_half_line_integral(h)
    N = grid.steps(T, "horizon T")
    target_seeds = [replica_seed(base_seed, i, _CF_TARGET_TAG) for i in range(replicas)]
    paths = np.vstack([cumulate(generate_fgn_batch(h, grid, target_seeds[i:i + CHUNK], method))
                       for i in range(0, replicas, CHUNK)])
    occupation = grid.delta * row_fsum(paths[:, :N] ** 2)
    s_sq = 2 * closed * occupation

    rows = []
    for lam in lambdas:
        cf, cf_se = empirical_cf(normalized, lam)
        target, target_se = _mean_var(np.exp(-0.5 * lam ** 2 * s_sq))
        rows.append({"lambda": lam, "empirical_cf": cf, "empirical_se": cf_se,
                     "printed_target": target, "printed_target_se": math.sqrt(target_se / replicas)})
    return MixedLimitReport(h, float(T), spec.eps, int(replicas), closed, nvar, rows)
