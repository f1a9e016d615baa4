"""Volterra kernel of fBm, the K+ operator and S-transforms of the functionals.

The kernel is

    K(t, s) = c_H [ (t (t-s) / s)^{H-1/2} - (H-1/2) s^{1/2-H} J(t, s) ],
    J(t, s) = int_s^t u^{H-3/2} (u-s)^{H-1/2} du,

with c_H calibrated so that int_0^1 K(1, s)^2 ds = 1.  Substituting
u = s e^y turns J into s^{2H-1} int_0^{log(t/s)} y^{H-1/2} g(y) dy with
g(y) = e^{y(H-1/2)} (expm1(y)/y)^{H-1/2} analytic, so one Gauss-Jacobi rule
with weight y^{H-1/2} handles every (t, s) at once.

Integrals over [0, t] with algebraic endpoint behaviour use a composite rule:
panels refined geometrically towards both ends, Gauss-Legendre inside and
Gauss-Jacobi on the two end panels with the endpoint exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .core_math import DEFAULT_QUADRATURE, FunctionalKind, QuadratureSpec, as_hurst
from .errors import DomainError, QuadratureError

MAX_HERMITE_FUNCTION = 30

_LEFT_LEVELS = 64
_RIGHT_LEVELS = 4
_ORDER = 16
_INNER_ORDER = 48
_PROBE_POINTS = 32


# ---------------------------------------------------------------------------
# Quadrature rules


@lru_cache(maxsize=None)
def _jacobi(order: int, alpha: float, beta: float):
    """Nodes/weights on [-1, 1] for the weight (1-x)^alpha (1+x)^beta."""
    if alpha == 0.0 and beta == 0.0:
        return np.polynomial.legendre.leggauss(order)
    return special.roots_jacobi(order, alpha, beta)


@lru_cache(maxsize=None)
def graded_rule(left_exp: float = 0.0, right_exp: float = 0.0, left_levels: int = _LEFT_LEVELS,
                right_levels: int = _RIGHT_LEVELS, order: int = _ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Rule on (0, 1) for integrands behaving like s^left_exp and (1-s)^right_exp.

    The end panels carry Gauss-Jacobi weights divided back out, so the rule
    integrates f directly: sum w_i f(s_i) ~ int_0^1 f.  Grading towards 0 goes
    deeper because sub-leading powers there are not captured by the weight.
    """
    x, w = _jacobi(order, 0.0, 0.0)
    left = 0.5 * 2.0 ** -np.arange(left_levels, -1, -1, dtype=float)
    right = 1.0 - 0.5 * 2.0 ** -np.arange(1, right_levels + 1, dtype=float)
    breaks = np.concatenate((left, right))
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * np.diff(breaks)
    nodes = [(mid[:, None] + half[:, None] * x).ravel()]
    weights = [(half[:, None] * w).ravel()]
    a = breaks[0]
    xj, wj = _jacobi(order, 0.0, float(left_exp))
    nodes.append(a * 0.5 * (xj + 1))
    weights.append(wj * (a / 2) / (1 + xj) ** left_exp)
    b = 1.0 - breaks[-1]
    xj, wj = _jacobi(order, float(right_exp), 0.0)
    nodes.append(1.0 - b * 0.5 * (1 - xj))
    weights.append(wj * (b / 2) / (1 - xj) ** right_exp)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    order_idx = np.argsort(nodes)
    nodes, weights = nodes[order_idx], weights[order_idx]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _gl_panels(lo: float, hi: float, panels: int = 4, order: int = 24):
    x, w = _jacobi(order, 0.0, 0.0)
    breaks = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * np.diff(breaks)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise QuadratureError(f"{what}: quadrature produced a non-finite value")
    return float(value)


class PanelSeries:
    """Piecewise Legendre interpolant of a smooth function on [lo, hi] with exact
    antiderivative.  Panels are graded geometrically towards ``lo``."""

    def __init__(self, f: Callable, lo: float, hi: float, order: int = 20, levels: int = 44,
                 uniform: int = 24):
        width = hi - lo
        geo = lo + width / uniform * 2.0 ** -np.arange(levels, 0, -1, dtype=float)
        uni = lo + width * np.arange(1, uniform + 1) / uniform
        self.breaks = np.concatenate(([lo], geo, uni))
        self.breaks[-1] = hi
        x, w = _jacobi(order, 0.0, 0.0)
        mid = 0.5 * (self.breaks[1:] + self.breaks[:-1])
        self.half = 0.5 * np.diff(self.breaks)
        nodes = mid[:, None] + self.half[:, None] * x
        values = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        # discrete orthogonality of Legendre polynomials at Gauss nodes
        vander = np.polynomial.legendre.legvander(x, order - 1)
        norms = (2 * np.arange(order) + 1) / 2.0
        self.coef = (values * w) @ vander * norms  # (panels, order)
        integ = np.polynomial.legendre.legint(self.coef.T, m=1, lbnd=-1, axis=0)
        self.integ = integ * self.half  # scale to the panel
        totals = np.polynomial.legendre.legval(np.ones(len(self.half)), self.integ, tensor=False)
        self.cumulative = np.concatenate(([0.0], np.cumsum(totals)))
        self.lo, self.hi = lo, hi

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.lo - 1e-14 * (self.hi - self.lo)) or np.any(
                t > self.hi + 1e-14 * (self.hi - self.lo)):
            raise DomainError("evaluation point outside the interpolation range")
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.half) - 1)
        mid = 0.5 * (self.breaks[idx] + self.breaks[idx + 1])
        return t, idx, (t - mid) / self.half[idx]

    def __call__(self, t):
        t, idx, x = self._locate(t)
        return np.polynomial.legendre.legval(x, self.coef[idx].T, tensor=False)

    def integral(self, t):
        """Integral of the interpolant from ``lo`` to ``t``."""
        t, idx, x = self._locate(t)
        inside = np.polynomial.legendre.legval(x, self.integ[:, idx], tensor=False)
        return self.cumulative[idx] + inside


# ---------------------------------------------------------------------------
# Test functions


def hermite_function(n: int, x):
    """L2-orthonormal Hermite function (physicists' convention)."""
    if int(n) != n or not 0 <= n <= MAX_HERMITE_FUNCTION + 1:
        raise DomainError(f"Hermite function index must lie in [0, {MAX_HERMITE_FUNCTION}], got {n!r}")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    for j in range(int(n)):
        prev, cur = cur, math.sqrt(2.0 / (j + 1)) * x * cur - math.sqrt(j / (j + 1)) * prev
    return cur if cur.ndim else float(cur)


def hermite_function_derivative(n: int, x):
    """Derivative via sqrt(n/2) xi_{n-1} - sqrt((n+1)/2) xi_{n+1}."""
    if int(n) != n or not 0 <= n <= MAX_HERMITE_FUNCTION:
        raise DomainError(f"Hermite function index must lie in [0, {MAX_HERMITE_FUNCTION}], got {n!r}")
    up = math.sqrt((n + 1) / 2.0) * hermite_function(n + 1, x)
    if n == 0:
        return -up
    return math.sqrt(n / 2.0) * hermite_function(n - 1, x) - up


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A smooth, rapidly decreasing function together with its derivative."""

    __test__ = False  # not a pytest class

    evaluator: Callable
    derivative_evaluator: Callable
    label: str = "custom"
    probe_range: tuple[float, float] = (-4.0, 4.0)

    def __post_init__(self):
        probes = np.linspace(*self.probe_range, _PROBE_POINTS)
        d = np.asarray(self.derivative_evaluator(probes), dtype=float)
        step = 1e-5 * np.maximum(1.0, np.abs(probes))
        fd = (np.asarray(self.evaluator(probes + step)) - np.asarray(self.evaluator(probes - step))) / (2 * step)
        scale = max(float(np.max(np.abs(d))), float(np.max(np.abs(self.evaluator(probes)))), 1e-300)
        bad = np.abs(fd - d) > 1e-5 * np.maximum(np.abs(d), scale)
        if np.any(bad):
            raise DomainError(f"derivative of test function {self.label!r} is inconsistent "
                              f"with finite differences at x = {probes[bad][0]:.4g}")

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.derivative_evaluator(np.asarray(x, dtype=float))

    @classmethod
    def hermite(cls, n: int) -> "TestFunction":
        hermite_function(n, 0.0)  # validates n
        return cls(lambda x, n=n: hermite_function(n, x),
                   lambda x, n=n: hermite_function_derivative(n, x), f"hermite xi_{n}")

    def reflected(self) -> "TestFunction":
        """x -> f(-x)."""
        f, df = self.evaluator, self.derivative_evaluator
        lo, hi = self.probe_range
        return TestFunction(lambda x: f(-np.asarray(x)), lambda x: -df(-np.asarray(x)),
                            f"{self.label} reflected", (-hi, -lo))

    def scaled_sum(self, a: float, other: "TestFunction", b: float) -> "TestFunction":
        """a * self + b * other."""
        f, df, g, dg = self.evaluator, self.derivative_evaluator, other.evaluator, other.derivative_evaluator
        return TestFunction(lambda x: a * f(x) + b * g(x), lambda x: a * df(x) + b * dg(x),
                            f"{a:g}*({self.label}) + {b:g}*({other.label})")

    def sup_norms(self, radius: float = 20.0, points: int = 40001) -> tuple[float, float]:
        x = np.linspace(-radius, radius, points)
        return float(np.max(np.abs(self(x)))), float(np.max(np.abs(self.derivative(x))))


# ---------------------------------------------------------------------------
# Kernel


def _kernel_bracket(h: float, t, s):
    """Kernel without the constant c_H, vectorised over broadcast (t, s)."""
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    a = h - 0.5
    first = (t / s) ** a * (t - s) ** a
    if a == 0.0:
        return first
    y, w = _jacobi(_INNER_ORDER, 0.0, a)
    L = np.log(t / s)
    yy = 0.5 * L[..., None] * (y + 1)
    safe = np.where(yy > 0, yy, 1.0)
    g = np.exp(a * yy) * np.where(yy > 0, np.expm1(safe) / safe, 1.0) ** a
    J = s ** (2 * h - 1) * (0.5 * L) ** (1 + a) * np.sum(g * w, axis=-1)
    return first - a * s ** (-a) * J


@dataclass(frozen=True)
class KernelContext:
    """Calibrated kernel constant plus the integral k(1) = int_0^1 K(1, s) ds."""

    H: float
    c_H: float
    k_one: float
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE

    @classmethod
    def calibrate(cls, H, quadrature: QuadratureSpec = DEFAULT_QUADRATURE) -> "KernelContext":
        h = as_hurst(H)
        s, w = graded_rule(-abs(2 * h - 1), 2 * h - 1)
        second = math.fsum((w * _kernel_bracket(h, 1.0, s) ** 2).tolist())
        c = 1.0 / math.sqrt(_finite(second, "kernel calibration"))
        s, w = graded_rule(-abs(h - 0.5), h - 0.5)
        k_one = c * math.fsum((w * _kernel_bracket(h, 1.0, s)).tolist())
        return cls(h, c, _finite(k_one, "kernel integral"), quadrature)

    # -- kernel and its t-derivative -------------------------------------

    def kernel(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0) or np.any(s >= t):
            raise DomainError("kernel needs 0 < s < t")
        return self.c_H * _kernel_bracket(self.H, t, s)

    def kernel_dt(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0) or np.any(s >= t):
            raise DomainError("kernel derivative needs 0 < s < t")
        h = self.H
        return self.c_H * (h - 0.5) * (t - s) ** (h - 1.5) * (s / t) ** (0.5 - h)

    # -- k(t) = int_0^t K(t, s) ds -----------------------------------------

    def k_quadrature(self, t):
        """k(t) by direct quadrature of the kernel on [0, t]."""
        t = np.asarray(t, dtype=float)
        s, w = graded_rule(-abs(self.H - 0.5), self.H - 0.5)
        tt = t[..., None]
        vals = self.c_H * _kernel_bracket(self.H, tt, tt * s)
        return t * np.sum(vals * w, axis=-1)

    def k(self, t):
        """k(t); the graded rule scales exactly with t, so k(t) = t^{H+1/2} k(1)."""
        t = np.asarray(t, dtype=float)
        return self.k_one * t ** (self.H + 0.5)

    def k_prime(self, t):
        """Central difference of k with step 1e-6 max(t, 1)."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("k'(t) needs t > 0")
        step = 1e-6 * np.maximum(t, 1.0)
        step = np.minimum(step, 0.5 * t)
        return (self.k(t + step) - self.k(t - step)) / (2 * step)

    def k_prime_power_law(self, t):
        """(H + 1/2) k(1) t^{H-1/2}: the power law with fitted constant."""
        return (self.H + 0.5) * self.k_one * np.asarray(t, dtype=float) ** (self.H - 0.5)

    # -- K+ and the bound functions ---------------------------------------

    def k_plus(self, xi: TestFunction, t):
        """K+ xi(t) = k'(t) xi(t) + int_0^t dK/dt(t, r) (xi(r) - xi(t)) dr."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("K+ needs t > 0")
        h = self.H
        xt = np.asarray(xi(t), dtype=float)
        out = self.k_prime(t) * xt
        if h == 0.5:
            return out if out.ndim else float(out)
        s, w = graded_rule(0.5 - h, h - 0.5)
        tt = t[..., None]
        r = tt * s
        dk = self.c_H * (h - 0.5) * (tt * (1 - s)) ** (h - 1.5) * s ** (0.5 - h)
        integrand = dk * (xi(r) - xt[..., None])
        out = out + t * np.sum(integrand * w, axis=-1)
        return out if out.ndim else float(out)

    def bound_c(self, t):
        """C(t) = |k'(t)| + int_0^t |dK/dt(t, r)| (t - r) dr (Gauss-Jacobi, exact weight)."""
        t = np.asarray(t, dtype=float)
        h = self.H
        if h == 0.5:
            return np.abs(self.k_prime(t))
        # The integrand c|H-1/2| (t-r)^{H-1/2} (r/t)^{1/2-H} is exactly the Jacobi
        # weight after r = t(1+x)/2, so the rule is exact: integral = c|H-1/2| t^{H+1/2} sum(w)/2.
        _, w = _jacobi(4, h - 0.5, 0.5 - h)
        integral = self.c_H * abs(h - 0.5) * t ** (h + 0.5) * 0.5 * math.fsum(w)
        return np.abs(self.k_prime(t)) + integral

    def bound_functions(self, t, eps0: float = 1.0, depth: int = 20):
        """(C(t), D(t), eps0) with D the maximal average of C over [t, t + eps], eps = eps0 2^-j."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("bound functions need t > 0")
        c_t = self.bound_c(t)
        x, w = _jacobi(16, 0.0, 0.0)
        eps = eps0 * 2.0 ** -np.arange(depth + 1)
        tt = t[..., None, None]
        ee = eps[:, None]
        nodes = tt + 0.5 * ee * (x + 1)
        avg = 0.5 * np.sum(self.bound_c(nodes) * w, axis=-1)
        d_t = np.maximum(c_t, np.max(avg, axis=-1))
        return c_t, d_t, eps0

    # -- Wiener integrals of test functions --------------------------------

    def kernel_transform(self, xi: TestFunction, t):
        """F(t) = int_0^t K(t, r) xi(r) dr, the S-transform of B_t."""
        t = np.asarray(t, dtype=float)
        s, w = graded_rule(-abs(self.H - 0.5), self.H - 0.5)
        flat = t.ravel()
        out = np.empty_like(flat)
        chunk = 64
        for i in range(0, flat.size, chunk):
            tt = flat[i:i + chunk, None]
            r = tt * s
            vals = self.c_H * _kernel_bracket(self.H, tt, r) * xi(r)
            out[i:i + chunk] = flat[i:i + chunk] * np.sum(vals * w, axis=-1)
        return out.reshape(t.shape)


def kernel_eval(ctx: KernelContext, t, s, order: str = "value"):
    """K(t, s) (``order="value"``) or dK/dt(t, s) (``order="dt"``)."""
    if order in ("value", "Value"):
        return ctx.kernel(t, s)
    if order in ("dt", "DtDerivative"):
        return ctx.kernel_dt(t, s)
    raise DomainError(f"unknown kernel order {order!r}")


def k_plus(ctx: KernelContext, xi: TestFunction, t):
    return ctx.k_plus(xi, t)


def bound_functions(ctx: KernelContext, t, eps0: float = 1.0):
    return ctx.bound_functions(t, eps0)


# ---------------------------------------------------------------------------
# Identities


def increment_sides(ctx: KernelContext, xi: TestFunction, u: float, eps: float) -> tuple[float, float]:
    """int_u^{u+eps} K+ xi(s) ds and F(u + eps) - F(u)."""
    if not (u > 0 and eps > 0):
        raise DomainError("increment identity needs u > 0 and eps > 0")
    nodes, weights = _gl_panels(u, u + eps)
    lhs = math.fsum((weights * ctx.k_plus(xi, nodes)).tolist())
    F = ctx.kernel_transform(xi, np.array([u + eps, u]))
    return lhs, float(F[0] - F[1])


def kernel_product_sides(ctx: KernelContext, s: float, r: float) -> tuple[float, float]:
    """int_0^s dK/ds(s, x) dK/dr(r, x) dx and H(2H-1)(r-s)^{2H-2}."""
    h = ctx.H
    if h <= 0.5:
        raise DomainError("kernel product identity holds for H > 1/2 only")
    if not 0 < s < r:
        raise DomainError("kernel product identity needs 0 < s < r")
    x, w = _jacobi(60, h - 1.5, 1 - 2 * h)
    xs = 0.5 * s * (x + 1)
    # weight (s-x)^{H-3/2} x^{1-2H} on [0, s]
    scale = (0.5 * s) ** ((h - 1.5) + (1 - 2 * h) + 1)
    rest = (ctx.c_H * (h - 0.5)) ** 2 * s ** (h - 0.5) * r ** (h - 0.5) * (r - xs) ** (h - 1.5)
    lhs = scale * math.fsum((w * rest).tolist())
    rhs = h * (2 * h - 1) * (r - s) ** (2 * h - 2)
    return lhs, rhs


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def identity_residual(ctx: KernelContext, kind: str, **params) -> float:
    """Relative residual of ``IncrementIdentity`` (xi, u, eps) or ``KernelProduct`` (s, r)."""
    key = kind.lower().replace("_", "").replace("-", "")
    if key in ("incrementidentity", "increment", "e7"):
        return _relative(*increment_sides(ctx, params["xi"], params["u"], params["eps"]))
    if key in ("kernelproduct", "product"):
        return _relative(*kernel_product_sides(ctx, params["s"], params["r"]))
    raise DomainError(f"unknown identity {kind!r}")


# ---------------------------------------------------------------------------
# S-transforms


def _outer(T: float):
    s, w = graded_rule(0.0, 0.0)
    return T * s, T * w


def _sum(values, weights, what: str) -> float:
    return _finite(math.fsum((np.asarray(values) * weights).tolist()), what)


class _Transforms:
    """Antiderivatives of K+ xi and K+ xi_reflected on [0, T + eps]."""

    def __init__(self, ctx: KernelContext, xi: TestFunction, upper: float, need_reflected: bool):
        self.plus = PanelSeries(lambda t: ctx.k_plus(xi, np.maximum(t, 1e-300)), 0.0, upper)
        self.reflected = None
        if need_reflected:
            xr = xi.reflected()
            self.reflected = PanelSeries(lambda t: ctx.k_plus(xr, np.maximum(t, 1e-300)), 0.0, upper)


def s_transform(ctx: KernelContext, kind: FunctionalKind, xi: TestFunction, T: float,
                eps: float, power: int | None = None) -> float:
    """S-transform of the functional at lag ``eps`` (``eps = 0`` gives the limit).

    ``power`` overrides the degree of the HermiteVariation kind and may be 1.
    The second process of a pair is realised through the reflected test
    function x -> xi(-x).
    """
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")
    if eps < 0:
        raise DomainError(f"lag must be non-negative, got {eps!r}")
    k = power if power is not None else kind.k
    if int(k) != k or k < 1:
        raise DomainError(f"power must be a positive integer, got {k!r}")
    u, w = _outer(T)
    what = f"S-transform of {kind.label}"

    if eps == 0:
        kp = ctx.k_plus(xi, u)
        if kind.name == "hermite":
            return _sum(kp ** k, w, what)
        kr = ctx.k_plus(xi.reflected(), u)
        if kind.name == "hat":
            return _sum(kr * kp, w, what)
        series = PanelSeries(lambda t: ctx.k_plus(xi.reflected(), np.maximum(t, 1e-300)), 0.0, T)
        return _sum(series.integral(u) * kp, w, what)

    tr = _Transforms(ctx, xi, T + eps, kind.is_bivariate)
    A = tr.plus.integral
    avg = (A(u + eps) - A(u)) / eps
    if kind.name == "hermite":
        return _sum(avg ** k, w, what)
    Ar = tr.reflected.integral
    if kind.name == "tilde":
        return _sum(Ar(u) * avg, w, what)
    if kind.name == "hat":
        return _sum((Ar(u + eps) - Ar(u)) / eps * avg, w, what)
    # Breve: inner average int_0^u (Ar(v+eps) - Ar(v))/eps dv via a second antiderivative
    second = PanelSeries(Ar, 0.0, T + eps)
    P = second.integral
    inner = (P(u + eps) - P(u) - P(eps)) / eps
    return _sum(inner * avg, w, what)


def inner_product_transform(ctx: KernelContext, xi: TestFunction, T: float, eps: float,
                            power: int = 2) -> float:
    """eps^-k int_0^T (F(u + eps) - F(u))^k du with F(t) = int_0^t K(t, r) xi(r) dr."""
    if not (T > 0 and eps > 0):
        raise DomainError("inner-product transform needs T > 0 and eps > 0")
    series = PanelSeries(lambda t: ctx.kernel_transform(xi, np.maximum(t, 1e-300)), 0.0, T + eps)
    u, w = _outer(T)
    avg = (series(u + eps) - series(u)) / eps
    return _sum(avg ** power, w, "inner-product transform")


def s_transform_bound(ctx: KernelContext, xi: TestFunction, T: float, power: int = 2) -> float:
    """M^k int_0^T D(u)^k du with M the larger sup norm of xi and xi'."""
    m = max(xi.sup_norms())
    u, w = _outer(T)
    _, d, _ = ctx.bound_functions(u)
    return m ** power * _sum(d ** power, w, "S-transform bound")
