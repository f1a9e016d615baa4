"""Scalar functions and limiting constants for Hermite-type functionals of fBm.

Everything here is pure and reentrant.  Integrals over the real line are
folded onto the half line, integrated adaptively up to a cutoff and closed
with an asymptotic power-series tail.  Second moments at finite lag are
reduced to one-dimensional integrals and evaluated on panels that are
geometrically graded towards every kink of the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, DomainError, QuadratureError, RegimeError

CRITICAL_TOL = 1e-12
MAX_HERMITE_DEGREE = 50

# Mixed differences switch to their Taylor expansion once |x| exceeds this
# multiple of the largest step; the direct formula loses digits to cancellation.
_SERIES_CUTOFF = 30.0
_SERIES_TERMS = 18
_TAIL_TERMS = 4


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Hurst:
    """Hurst index in the open unit interval with regime helpers."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or not 0.0 < v < 1.0:
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value

    @staticmethod
    def hermite_threshold(k: int) -> float:
        return 1.0 - 1.0 / (2 * k)

    def is_critical(self, k: int) -> bool:
        return abs(self.value - self.hermite_threshold(k)) <= CRITICAL_TOL

    def is_clt(self, k: int) -> bool:
        return self.value < self.hermite_threshold(k) and not self.is_critical(k)

    def is_hermite(self, k: int) -> bool:
        return self.value > self.hermite_threshold(k) and not self.is_critical(k)


def as_hurst(H) -> float:
    """Validate ``H`` (a :class:`Hurst` or a number) and return it as a float."""
    if isinstance(H, Hurst):
        return H.value
    return Hurst(H).value


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    tail_cutoff: float = 50.0
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if not self.tail_cutoff >= 2.0:
            raise DomainError("tail cutoff must be at least 2 (all kinks lie in [-1, 1])")
        if int(self.max_subdivisions) < 1:
            raise DomainError("max_subdivisions must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()


class Regime(str, Enum):
    GAUSSIAN_CLT = "GaussianCLT"
    CRITICAL_LOG = "CriticalLog"
    L2_LIMIT = "L2Limit"
    S_STAR_ONLY = "SStarOnly"


_KIND_NAMES = ("hermite", "tilde", "breve", "hat")
_KIND_LABELS = {"hermite": "HermiteVariation", "tilde": "Tilde", "breve": "Breve", "hat": "Hat"}


@dataclass(frozen=True)
class FunctionalKind:
    """Which functional is evaluated: ``hermite`` (with degree ``k``), ``tilde``,
    ``breve`` or ``hat``.  ``k`` is kept at 2 for the bivariate kinds."""

    name: str
    k: int = 2

    def __post_init__(self):
        name = str(self.name).lower()
        if name in ("hermitevariation", "hermite_variation"):
            name = "hermite"
        if name not in _KIND_NAMES:
            raise DomainError(f"unknown functional kind {self.name!r}")
        object.__setattr__(self, "name", name)
        k = int(self.k)
        if k != self.k:
            raise DomainError(f"degree must be an integer, got {self.k!r}")
        if name == "hermite" and k < 2:
            raise DomainError(f"HermiteVariation needs k >= 2, got {k}")
        object.__setattr__(self, "k", k if name == "hermite" else 2)

    @classmethod
    def hermite(cls, k: int) -> "FunctionalKind":
        return cls("hermite", k)

    @property
    def is_bivariate(self) -> bool:
        return self.name != "hermite"

    @property
    def threshold(self) -> float:
        if self.name == "hermite":
            return Hurst.hermite_threshold(self.k)
        return {"tilde": 0.5, "breve": 0.25, "hat": 0.75}[self.name]

    @property
    def label(self) -> str:
        if self.name == "hermite":
            return f"HermiteVariation(k={self.k})"
        return _KIND_LABELS[self.name]

    def __str__(self):
        return self.label


TILDE = FunctionalKind("tilde")
BREVE = FunctionalKind("breve")
HAT = FunctionalKind("hat")


@dataclass
class LimitPrediction:
    kind: FunctionalKind
    H: float
    k: int
    T: float
    regime: Regime
    normalization_exponent: float | str | None
    limit_constant: float
    threshold: float
    threshold_note: str
    t_exponent: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.label,
            "hurst": self.H,
            "k": self.k,
            "T": self.T,
            "regime": self.regime.value,
            "normalization_exponent": self.normalization_exponent,
            "constant": self.limit_constant,
            "t_exponent": self.t_exponent,
            "threshold": self.threshold,
            "threshold_note": self.threshold_note,
            "extras": dict(self.extras),
        }


# ---------------------------------------------------------------------------
# Elementary functions


def hermite_poly(k: int, x):
    """Probabilists' Hermite polynomial h_k evaluated by the three-term recurrence."""
    if int(k) != k or not 0 <= k <= MAX_HERMITE_DEGREE:
        raise DomainError(f"Hermite degree must be an integer in [0, {MAX_HERMITE_DEGREE}], got {k!r}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        return _unwrap(prev)
    for j in range(1, int(k)):
        prev, cur = cur, x * cur - j * prev
    return _unwrap(cur)


def _unwrap(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def _power(x, p, odd):
    ax = np.abs(x)
    val = ax ** p
    return np.sign(x) * val if odd else val


def _mixed_difference(x, a: float, b: float, p: float, odd: bool = False):
    """g(x+a) + g(x-b) - g(x) - g(x+a-b) for g = |x|^p (or sign(x)|x|^p).

    Far from the kinks the Taylor expansion in the steps is used; its n-th term
    carries the factor a^n + (-b)^n - (a-b)^n, which vanishes for n = 1.
    """
    x = np.asarray(x, dtype=float)
    scale = max(a, b)
    far = np.abs(x) > _SERIES_CUTOFF * scale
    out = np.empty_like(x)
    near = ~far
    if near.any():
        xn = x[near]
        out[near] = (_power(xn + a, p, odd) + _power(xn - b, p, odd)
                     - _power(xn, p, odd) - _power(xn + (a - b), p, odd))
    if far.any():
        xf = x[far]
        ax = np.abs(xf)
        positive = xf > 0
        total = np.zeros_like(xf)
        for n in range(_SERIES_TERMS, 1, -1):
            steps = a ** n + (-b) ** n - (a - b) ** n
            coef = special.binom(p, n) * steps
            if coef == 0.0:
                continue
            neg_sign = (-1.0) ** n * (-1.0 if odd else 1.0)
            total += coef * np.where(positive, 1.0, neg_sign) * ax ** (-n)
        out[far] = ax ** p * total
    return out


def rho(H, x):
    """Correlation of unit-lag fBm increments at separation ``x``."""
    h = as_hurst(H)
    return _unwrap(0.5 * _mixed_difference(x, 1.0, 1.0, 2 * h))


def rho_eps_eta(H, eps: float, eta: float, x):
    """Covariance of B_{u+eps} - B_u and B_{v+eta} - B_v at x = u - v."""
    h = as_hurst(H)
    if not (eps > 0 and eta > 0):
        raise DomainError(f"lags must be positive, got eps={eps!r}, eta={eta!r}")
    return _unwrap(0.5 * _mixed_difference(x, float(eps), float(eta), 2 * h))


def fbm_covariance(H, t, s):
    h = as_hurst(H)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("fBm covariance needs non-negative times")
    return _unwrap(0.5 * (t ** (2 * h) + s ** (2 * h) - np.abs(t - s) ** (2 * h)))


def psi(H, x):
    """2|x|^{2H+2} - |x+1|^{2H+2} - |x-1|^{2H+2}."""
    h = as_hurst(H)
    return _unwrap(-_mixed_difference(x, 1.0, 1.0, 2 * h + 2))


# ---------------------------------------------------------------------------
# Half-line integrals with asymptotic tails


def _step_series(p: float, terms: int = _TAIL_TERMS) -> np.ndarray:
    """Coefficients d_j with |x+1|^p + |x-1|^p - 2|x|^p = x^{p-2} sum_j d_j x^{-2j}, x > 1."""
    return np.array([2.0 * special.binom(p, 2 * j + 2) for j in range(terms)])


def _series_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: min(len(a), len(b))]


def _tail_integral(coeffs: np.ndarray, lead: float, A: float) -> float:
    """Integral over [A, inf) of x^lead * sum_j coeffs[j] x^{-2j}."""
    total = []
    for j, c in enumerate(coeffs):
        e = lead - 2 * j + 1
        if c == 0.0:
            continue
        if e >= 0:
            raise DivergenceError(f"tail exponent {lead - 2 * j:.6g} is not integrable")
        total.append(c * A ** e / (-e))
    return math.fsum(total)


def _quad(f, a: float, b: float, spec: QuadratureSpec, what: str) -> float:
    out = integrate.quad(f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                         limit=int(spec.max_subdivisions), full_output=1)
    value, err = out[0], out[1]
    allowed = 1e4 * max(spec.abs_tol, spec.rel_tol * abs(value))
    if not math.isfinite(value) or err > allowed:
        raise QuadratureError(f"{what}: quadrature error estimate {err:.3g} exceeds {allowed:.3g}")
    return value


def _half_line(f, coeffs: np.ndarray, lead: float, spec: QuadratureSpec, what: str) -> float:
    """Integral of ``f`` over [0, inf): adaptive pieces up to the cutoff plus series tail."""
    A = float(spec.tail_cutoff)
    pieces = [_quad(f, 0.0, 1.0, spec, what), _quad(f, 1.0, 2.0, spec, what)]
    # Geometric panels keep each adaptive call on a mild dynamic range.
    left = 2.0
    while left < A:
        right = min(2.0 * left, A)
        pieces.append(_quad(f, left, right, spec, what))
        left = right
    pieces.append(_tail_integral(coeffs, lead, A))
    return math.fsum(pieces)


def integral_rho_power(H, k: int, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Integral of rho^k over the real line (finite iff H < 1 - 1/(2k))."""
    h = as_hurst(H)
    if int(k) != k or k < 1:
        raise DomainError(f"power must be a positive integer, got {k!r}")
    k = int(k)
    threshold = Hurst.hermite_threshold(k)
    if h >= threshold - CRITICAL_TOL:
        raise DivergenceError(
            f"integral of rho^{k} diverges for H >= 1 - 1/(2k) = {threshold:.6g} (H = {h:.6g})")
    base = 0.5 * _step_series(2 * h)
    coeffs = base.copy()
    for _ in range(k - 1):
        coeffs = _series_product(coeffs, base)
    lead = k * (2 * h - 2)
    half = _half_line(lambda x: rho(h, x) ** k, coeffs, lead, spec, f"integral of rho^{k}")
    return 2.0 * half


def rho_half_line_integral(H, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Integral of rho over [0, inf): (closed form, raw quadrature).

    The closed form is the limit of the second difference of x^{2H+1}/(2(2H+1)),
    which is 0 below H = 1/2, 1/2 at H = 1/2 and infinite above.
    """
    h = as_hurst(H)
    if h < 0.5:
        closed = 0.0
        quad = _half_line(lambda x: rho(h, x), 0.5 * _step_series(2 * h), 2 * h - 2,
                          spec, "integral of rho")
    elif h == 0.5:
        closed = quad = 0.5
    else:
        closed = quad = math.inf
    return closed, quad


def sigma_hat_sq(H, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """One quarter of the integral of (2 rho)^2 over the real line (H < 3/4)."""
    h = as_hurst(H)
    if h >= 0.75 - CRITICAL_TOL:
        raise DivergenceError(f"Hat variance constant diverges for H >= 3/4 (H = {h:.6g})")
    twice = _step_series(2 * h)
    coeffs = _series_product(twice, twice)
    half = _half_line(lambda x: (2.0 * rho(h, x)) ** 2, coeffs, 4 * h - 4, spec, "Hat constant")
    return 0.25 * 2.0 * half


def sigma_breve_sq(H, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Breve variance constant: integral of 2 rho psi over the real line over 4(2H+1)(2H+2).

    Evaluated with the sign exactly as in the defining formula.  Finite for H < 1/4.
    """
    h = as_hurst(H)
    if h >= 0.25 - CRITICAL_TOL:
        raise DivergenceError(f"Breve variance constant diverges for H >= 1/4 (H = {h:.6g})")
    psi_coeffs = -_step_series(2 * h + 2)
    coeffs = _series_product(_step_series(2 * h), psi_coeffs)
    half = _half_line(lambda x: 2.0 * rho(h, x) * psi(h, x), coeffs, 4 * h - 2, spec,
                      "Breve constant")
    return 2.0 * half / (4.0 * (2 * h + 1) * (2 * h + 2))


def c_kH(H, k: int) -> float:
    """Normalising constant of the Hermite-regime second moment (H > 1 - 1/(2k))."""
    h = as_hurst(H)
    if int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")
    threshold = Hurst.hermite_threshold(k)
    if h <= threshold + CRITICAL_TOL:
        raise DomainError(f"c_kH needs H > 1 - 1/(2k) = {threshold:.6g} (H = {h:.6g})")
    # exact rational arithmetic at the shortest decimal form of H, rounded once
    q = Fraction(repr(h))
    return float(q ** k * (2 * q - 1) ** k / ((q * k - k + 1) * (2 * q * k - 2 * k + 1)))


# ---------------------------------------------------------------------------
# Regime classification and limits


def _side(h: float, threshold: float) -> str:
    if abs(h - threshold) <= CRITICAL_TOL:
        return "critical"
    return "below" if h < threshold else "above"


def classify_regime(kind: FunctionalKind, H) -> tuple[Regime, float | str | None]:
    """Regime and normalization exponent of ``kind`` at ``H`` (no quadrature)."""
    h = as_hurst(H)
    side = _side(h, kind.threshold)
    if side == "above" or (side == "critical" and kind.name == "tilde"):
        return Regime.L2_LIMIT, None
    if side == "critical":
        return Regime.CRITICAL_LOG, "log"
    exponent = {
        "hermite": kind.k * (1 - h) - 0.5,
        "tilde": 0.5 - h,
        "breve": 0.5 - 2 * h,
        "hat": 1.5 - 2 * h,
    }[kind.name]
    return Regime.GAUSSIAN_CLT, exponent


def _l2_bivariate_moment(h: float, T: float) -> float:
    """L2 second moment shared by the Tilde and Breve limits, in closed form."""
    first = h * T ** (4 * h) * (1.0 / (4 * h) + special.beta(2 * h + 1, 2 * h))
    second = h * (2 * h - 1) * T ** (4 * h) / ((4 * h - 1) * 4 * h)
    return float(first - second)


def _tilde_l2_moment(h: float, T: float, spec: QuadratureSpec) -> float:
    """H(2H-1) times the double integral of |u-v|^{2H-2} R_H(u,v), reduced to one dimension."""
    inner = _quad(lambda u: u ** (2 * h) * (u ** (2 * h - 1) + (T - u) ** (2 * h - 1)),
                  0.0, T, spec, "Tilde L2 moment")
    return float(h * inner - h * (2 * h - 1) * T ** (4 * h) / ((4 * h - 1) * 4 * h))


def limit_prediction(kind: FunctionalKind, H, k: int | None = None, T: float = 1.0,
                     spec: QuadratureSpec = DEFAULT_QUADRATURE) -> LimitPrediction:
    """Regime, normalization and limiting constant for ``kind`` at (H, k, T)."""
    h = as_hurst(H)
    if k is not None and kind.name == "hermite" and int(k) != kind.k:
        kind = FunctionalKind.hermite(k)
    if not T > 0:
        raise DomainError(f"horizon T must be positive, got {T!r}")
    T = float(T)
    k = kind.k
    regime, exponent = classify_regime(kind, h)
    extras: dict = {}
    t_exp = None
    threshold = kind.threshold

    try:
        if kind.name == "hermite":
            fact = math.factorial(k)
            if regime is Regime.GAUSSIAN_CLT:
                integral = integral_rho_power(h, k, spec)
                constant, t_exp = T * fact * integral, 1.0
                extras["integral_rho_power"] = integral
                note = f"Gaussian CLT below H = 1 - 1/(2k) = {threshold:.6g}; variance over the whole real line"
            elif regime is Regime.CRITICAL_LOG:
                constant = T * 2 * fact * (1 - 1 / (2 * k)) ** k * (1 - 1 / k) ** k
                t_exp = 1.0
                note = f"critical H = {threshold:.6g}: normalization by sqrt(log(1/eps))"
            else:
                c = c_kH(h, k)
                t_exp = float((2 * Fraction(repr(h)) - 2) * k + 2)
                constant = c * T ** t_exp
                extras["c_kH"] = c
                extras["second_moment_limit"] = fact * constant
                note = (f"L2 limit above H = {threshold:.6g}; constant is c_kH T^{t_exp:.6g}, while the "
                        "second moment of the functional tends to k! times it (second_moment_limit)")
        elif kind.name == "tilde":
            if regime is Regime.GAUSSIAN_CLT:
                closed, quad = rho_half_line_integral(h, spec)
                scale = 2 * T ** (2 * h + 1) / (2 * h + 1)
                constant, t_exp = scale * closed, 2 * h + 1
                extras["rho_half_line_closed_form"] = closed
                extras["rho_half_line_quadrature"] = quad
                extras["nominal_constant_quadrature"] = scale * quad
                note = ("mixed Gaussian limit below H = 1/2; the nominal constant contains the "
                        "half-line integral of rho, which is 0, so compare with the empirical variance")
            else:
                constant = _tilde_l2_moment(h, T, spec)
                t_exp = 4 * h
                extras["closed_form"] = _l2_bivariate_moment(h, T)
                note = "L2 limit at and above H = 1/2 (Ito isometry value T^2/2 at H = 1/2)"
        elif kind.name == "breve":
            if regime is Regime.GAUSSIAN_CLT:
                sig = sigma_breve_sq(h, spec)
                constant, t_exp = T * sig, 1.0
                extras["sigma_breve_sq"] = sig
                note = "Gaussian CLT below H = 1/4"
            elif regime is Regime.CRITICAL_LOG:
                constant, t_exp = T / 8, 1.0
                note = "critical H = 1/4: normalization by sqrt(log(1/eps))"
            else:
                constant, t_exp = _l2_bivariate_moment(h, T), 4 * h
                note = "L2 limit above H = 1/4"
        else:
            if regime is Regime.GAUSSIAN_CLT:
                sig = sigma_hat_sq(h, spec)
                constant, t_exp = T * sig, 1.0
                extras["sigma_hat_sq"] = sig
                note = "Gaussian CLT below H = 3/4"
            elif regime is Regime.CRITICAL_LOG:
                constant, t_exp = 9 * T / 32, 1.0
                note = "critical H = 3/4: normalization by sqrt(log(1/eps))"
            else:
                t_exp = 4 * h - 2
                constant = h ** 2 * (2 * h - 1) ** 2 * 2 * T ** t_exp / ((4 * h - 3) * (4 * h - 2))
                note = "L2 limit above H = 3/4"
    except DivergenceError as exc:
        raise RegimeError(f"{kind.label} at H = {h:.6g}: {exc}") from exc

    if not constant >= 0:
        extras["negative_constant"] = constant
    return LimitPrediction(kind=kind, H=h, k=k, T=T, regime=regime,
                           normalization_exponent=exponent, limit_constant=constant,
                           threshold=threshold, threshold_note=note, t_exponent=t_exp,
                           extras=extras)


# ---------------------------------------------------------------------------
# Exact second moments at finite lags

_COARSE_ORDER = 16
_FINE_ORDER = 24
_GRADING_LEVELS = 52


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _graded_breaks(lo: float, hi: float, centers) -> np.ndarray:
    """Panel boundaries on [lo, hi] refined geometrically towards each center."""
    width = hi - lo
    offsets = width * 2.0 ** -np.arange(_GRADING_LEVELS, dtype=float)
    pts = [np.array([lo, hi])]
    for c in centers:
        cand = np.concatenate(([c], c + offsets, c - offsets))
        pts.append(cand[(cand >= lo) & (cand <= hi)])
    return np.unique(np.concatenate(pts))


def _integrate_graded(f, lo: float, hi: float, centers, spec: QuadratureSpec, what: str) -> float:
    """Composite Gauss-Legendre on graded panels; two orders give an error estimate."""
    breaks = _graded_breaks(lo, hi, centers)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * np.diff(breaks)
    results = []
    for order in (_COARSE_ORDER, _FINE_ORDER):
        x, w = _gauss_legendre(order)
        nodes = (mid[:, None] + half[:, None] * x).ravel()
        terms = f(nodes) * (half[:, None] * w).ravel()
        results.append((math.fsum(terms), math.fsum(np.abs(terms))))
    (coarse, _), (fine, scale) = results
    err = abs(fine - coarse)
    allowed = 1e3 * max(spec.abs_tol * scale, spec.rel_tol * scale)
    if not math.isfinite(fine) or err > allowed:
        raise QuadratureError(f"{what}: achieved error {err:.3g} exceeds {allowed:.3g}")
    return fine


class _LagFunctions:
    """Covariance of lagged increments and its closed-form primitives."""

    def __init__(self, h: float, eps: float, eta: float):
        self.h, self.eps, self.eta = h, eps, eta
        self.kinks = (0.0, -eps, eta, eta - eps)

    def cov(self, x):
        return 0.5 * _mixed_difference(x, self.eps, self.eta, 2 * self.h)

    def primitive(self, x):
        """Antiderivative of ``cov`` vanishing at 0."""
        p = 2 * self.h + 1
        at_zero = _mixed_difference(np.zeros(1), self.eps, self.eta, p, odd=True)[0]
        return 0.5 * (_mixed_difference(x, self.eps, self.eta, p, odd=True) - at_zero) / p

    def double_primitive(self, x):
        """Mixed difference of |x|^{2H+2}/((2H+1)(2H+2)); its second derivative is 2 cov."""
        p = 2 * self.h + 2
        return _mixed_difference(x, self.eps, self.eta, p) / ((p - 1) * p)

    def block(self, u, v):
        """Integral of cov(s - s') over [0, u] x [0, v] in closed form."""
        dp = self.double_primitive
        return 0.5 * (dp(np.asarray(u, float)) - dp(np.zeros(1))[0]
                      - dp(np.asarray(u, float) - np.asarray(v, float)) + dp(-np.asarray(v, float)))


def second_moment_exact(kind: FunctionalKind, H, k: int | None = None, T: float = 1.0,
                        eps: float = 2.0 ** -8, eta: float | None = None,
                        spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """E[X_eps X_eta] for the continuous-time functional ``kind``."""
    h = as_hurst(H)
    if k is not None and kind.name == "hermite" and int(k) != kind.k:
        kind = FunctionalKind.hermite(k)
    eta = eps if eta is None else eta
    if not (eps > 0 and eta > 0):
        raise DomainError(f"lags must be positive, got eps={eps!r}, eta={eta!r}")
    if not T > 0:
        raise DomainError(f"horizon T must be positive, got {T!r}")
    T, eps, eta = float(T), float(eps), float(eta)
    lag = _LagFunctions(h, eps, eta)
    kinks = lag.kinks
    what = f"second moment of {kind.label}"

    def over_diff(g):
        # integral over [0,T]^2 of g(u - v) as a single integral in x = u - v
        return _integrate_graded(lambda x: g(x) * (T - np.abs(x)), -T, T, kinks, spec, what)

    if kind.name == "hermite":
        kk = kind.k
        integral = over_diff(lambda x: lag.cov(x) ** kk)
        return math.factorial(kk) * integral / (eps * eta) ** kk
    if kind.name == "hat":
        return over_diff(lambda x: lag.cov(x) ** 2) / (eps * eta) ** 2

    kink_arr = np.array(kinks)
    u_centers = np.concatenate((kink_arr, -kink_arr, T + kink_arr, T - kink_arr, [T]))
    prim = lag.primitive

    def over_u(g):
        return _integrate_graded(g, 0.0, T, u_centers, spec, what)

    if kind.name == "tilde":
        p2 = 2 * h
        first = over_u(lambda u: u ** p2 * (prim(u) - prim(u - T)))
        second = over_u(lambda v: v ** p2 * (prim(T - v) - prim(-v)))
        third = over_diff(lambda x: np.abs(x) ** p2 * lag.cov(x))
        return 0.5 * (first + second - third) / (eps * eta)

    dp = lag.double_primitive
    dp0 = dp(np.zeros(1))[0]
    first = over_u(lambda u: dp(u) * (prim(u) - prim(u - T)))
    second = over_u(lambda v: dp(-v) * (prim(T - v) - prim(-v)))
    third = -dp0 * over_diff(lag.cov)
    fourth = -over_diff(lambda x: lag.cov(x) * dp(x))
    return 0.5 * (first + second + third + fourth) / (eps * eta) ** 2
