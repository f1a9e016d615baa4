"""Left-endpoint Riemann sums of the four functionals on sampled paths.

For a lag eps = m * delta and horizon T = N * delta the increments
B_{u_i + eps} - B_{u_i} are exact grid differences, so no interpolation is
involved.  All sums are compensated (``math.fsum`` row by row, Neumaier for the
running inner sum of the Breve functional), which keeps the pathwise
decomposition identity exact to rounding.

The array-level helpers accept a single path (1-D) or a batch of paths
(2-D, one path per row) and return one value per path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import (BREVE, HAT, TILDE, FunctionalKind, Regime, as_hurst,
                        classify_regime, hermite_poly)
from .errors import AlignmentError, DomainError
from .path_engine import FbmPath, GridSpec, PathPair

__all__ = [
    "FunctionalKind", "TILDE", "BREVE", "HAT", "EpsSpec", "Normalization", "FunctionalSample",
    "hermite_variation", "bilinear_functional", "evaluate", "hat_decomposition_residual",
    "raw_values",
]


@dataclass(frozen=True)
class EpsSpec:
    """Lag eps = m * delta on a grid of mesh delta."""

    m: int
    delta: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"lag multiple must be an integer >= 1, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def eps(self) -> float:
        return self.m * self.delta

    @classmethod
    def from_eps(cls, eps: float, grid: GridSpec) -> "EpsSpec":
        if not eps > 0:
            raise DomainError(f"lag must be positive, got {eps!r}")
        return cls(grid.steps(eps, "lag"), grid.delta)


@dataclass(frozen=True)
class Normalization:
    """``power`` multiplies by eps**exponent, ``log`` divides by sqrt(log(1/eps)),
    ``none`` leaves the raw value unchanged."""

    mode: str
    exponent: float | None = None

    @classmethod
    def for_kind(cls, kind: FunctionalKind, H) -> "Normalization":
        regime, exponent = classify_regime(kind, H)
        if regime is Regime.GAUSSIAN_CLT:
            return cls("power", float(exponent))
        if regime is Regime.CRITICAL_LOG:
            return cls("log")
        return cls("none")

    def apply(self, raw, eps: float):
        if self.mode == "power":
            return raw * eps ** self.exponent
        if self.mode == "log":
            return raw / math.sqrt(math.log(1.0 / eps))
        return raw

    def to_dict(self) -> dict:
        return {"mode": self.mode, "exponent": self.exponent}


@dataclass(frozen=True)
class FunctionalSample:
    kind: FunctionalKind
    H: float
    T: float
    eps: float
    raw_value: float
    normalized_value: float
    normalization: Normalization


# ---------------------------------------------------------------------------
# Compensated reductions


def row_fsum(a: np.ndarray):
    """math.fsum along the last axis (a float for 1-D input)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return math.fsum(a.tolist())
    flat = a.reshape(-1, a.shape[-1])
    return np.array([math.fsum(r) for r in flat.tolist()]).reshape(a.shape[:-1])


def exclusive_prefix_sum(a: np.ndarray) -> np.ndarray:
    """out[..., i] = sum of a[..., :i], accumulated with Neumaier compensation."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    total = np.zeros(a.shape[:-1])
    comp = np.zeros(a.shape[:-1])
    for i in range(a.shape[-1]):
        out[..., i] = total + comp
        x = a[..., i]
        t = total + x
        comp += np.where(np.abs(total) >= np.abs(x), (total - t) + x, (x - t) + total)
        total = t
    return out


# ---------------------------------------------------------------------------
# Array-level evaluation


def _layout(grid: GridSpec, T: float, eps: EpsSpec | float) -> tuple[int, int, float]:
    if not T > 0:
        raise DomainError(f"horizon T must be positive, got {T!r}")
    if isinstance(eps, EpsSpec):
        if abs(eps.delta - grid.delta) > 1e-15 * grid.delta:
            raise AlignmentError("lag spec was built for a different mesh")
        m = eps.m
    else:
        m = EpsSpec.from_eps(eps, grid).m
    N = grid.steps(T, "horizon T")
    if N < 1:
        raise AlignmentError("horizon T must contain at least one mesh step")
    if m + N > grid.n:
        raise AlignmentError(
            f"grid of length {grid.T_total!r} does not cover T + eps = {(N + m) * grid.delta!r}")
    return m, N, m * grid.delta


def _incr(values: np.ndarray, m: int, N: int) -> np.ndarray:
    return values[..., m:m + N] - values[..., :N]


def hermite_raw(values, h: float, k: int, m: int, N: int, delta: float) -> np.ndarray:
    eps = m * delta
    terms = hermite_poly(k, _incr(values, m, N) / eps ** h)
    return eps ** (-k * (1 - h)) * delta * row_fsum(terms)


def tilde_raw(v1, v2, m: int, N: int, delta: float):
    eps = m * delta
    return delta * row_fsum(v1[..., :N] * _incr(v2, m, N)) / eps


def breve_raw(v1, v2, m: int, N: int, delta: float):
    eps = m * delta
    inner = delta * exclusive_prefix_sum(_incr(v1, m, N)) / eps
    return delta * row_fsum(inner * _incr(v2, m, N)) / eps


def hat_raw(v1, v2, m: int, N: int, delta: float):
    eps = m * delta
    return delta * row_fsum(_incr(v1, m, N) * _incr(v2, m, N)) / eps ** 2


def raw_values(kind: FunctionalKind, H, grid: GridSpec, first, second=None, T: float = 1.0,
               eps: EpsSpec | float = 0.0):
    """Raw functional values for one path (1-D arrays) or a batch (2-D arrays)."""
    h = as_hurst(H)
    m, N, _ = _layout(grid, T, eps)
    first = np.asarray(first, dtype=float)
    if kind.name == "hermite":
        return hermite_raw(first, h, kind.k, m, N, grid.delta)
    if second is None:
        raise DomainError(f"{kind.label} needs a pair of paths")
    second = np.asarray(second, dtype=float)
    fn = {"tilde": tilde_raw, "breve": breve_raw, "hat": hat_raw}[kind.name]
    return fn(first, second, m, N, grid.delta)


# ---------------------------------------------------------------------------
# Path-level API


def _sample(kind, h, T, eps_value, raw) -> FunctionalSample:
    norm = Normalization.for_kind(kind, h)
    normalized = norm.apply(raw, eps_value)
    if not (math.isfinite(raw) and math.isfinite(normalized)):
        raise DomainError(f"{kind.label} produced a non-finite value")
    return FunctionalSample(kind, h, float(T), eps_value, float(raw), float(normalized), norm)


def hermite_variation(path: FbmPath, k: int, T: float, eps: EpsSpec | float) -> FunctionalSample:
    kind = FunctionalKind.hermite(k)
    m, N, eps_value = _layout(path.grid, T, eps)
    raw = hermite_raw(path.values, path.H, kind.k, m, N, path.grid.delta)
    return _sample(kind, path.H, T, eps_value, raw)


def bilinear_functional(pair: PathPair, kind: FunctionalKind, T: float,
                        eps: EpsSpec | float) -> FunctionalSample:
    if not kind.is_bivariate:
        raise DomainError("bilinear_functional handles Tilde, Breve and Hat only")
    grid = pair.first.grid
    m, N, eps_value = _layout(grid, T, eps)
    raw = raw_values(kind, pair.first.H, grid, pair.first.values, pair.second.values, T,
                     EpsSpec(m, grid.delta))
    return _sample(kind, pair.first.H, T, eps_value, raw)


def evaluate(kind: FunctionalKind, paths, T: float, eps: EpsSpec | float) -> FunctionalSample:
    """Dispatch on the kind: a single path for HermiteVariation, a pair otherwise."""
    if kind.name == "hermite":
        path = paths.first if isinstance(paths, PathPair) else paths
        return hermite_variation(path, kind.k, T, eps)
    if not isinstance(paths, PathPair):
        raise DomainError(f"{kind.label} needs a PathPair")
    return bilinear_functional(paths, kind, T, eps)


def decomposition_sides(beta, beta_tilde, h: float, grid: GridSpec, T: float,
                        eps: EpsSpec | float) -> tuple[float, float]:
    """Both sides of the identity eps^{3/2-2H} Hat(B1, B2) = (V(beta) - V(beta~)) / 2 sqrt(eps),
    with B1 = (beta + beta~)/sqrt 2, B2 = (beta - beta~)/sqrt 2 and V the
    delta-sum of h_2 of the scaled increments."""
    m, N, eps_value = _layout(grid, T, eps)
    beta = np.asarray(beta, dtype=float)
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    root2 = math.sqrt(2.0)
    b1 = (beta + beta_tilde) / root2
    b2 = (beta - beta_tilde) / root2
    direct = eps_value ** (1.5 - 2 * h) * hat_raw(b1, b2, m, N, grid.delta)
    scale = eps_value ** h
    v_beta = grid.delta * row_fsum(hermite_poly(2, _incr(beta, m, N) / scale))
    v_tilde = grid.delta * row_fsum(hermite_poly(2, _incr(beta_tilde, m, N) / scale))
    via_hermite = 0.5 * eps_value ** -0.5 * (v_beta - v_tilde)
    return float(direct), float(via_hermite)


def relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def hat_decomposition_residual(beta: FbmPath, beta_tilde: FbmPath, T: float,
                               eps: EpsSpec | float) -> float:
    if beta.grid != beta_tilde.grid or beta.H != beta_tilde.H:
        raise DomainError("decomposition needs two paths on the same grid with the same H")
    direct, via = decomposition_sides(beta.values, beta_tilde.values, beta.H, beta.grid, T, eps)
    return relative_gap(direct, via)
