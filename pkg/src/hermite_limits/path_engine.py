"""Exact synthesis of fractional Gaussian noise and fBm paths.

Two samplers are provided.  Circulant embedding (Davies-Harte) embeds the
Toeplitz covariance of n increments in a circulant of size 2n and colours
complex Gaussian noise with the square root of its FFT spectrum.  The Cholesky
sampler factors the n x n Toeplitz matrix directly and serves as the reference
implementation for n <= 4096.

Randomness comes from numpy's Philox counter-based generator keyed by a
64-bit seed.  Seeds for paths, pairs and replicas are derived with
:func:`mix64`, a SplitMix64 avalanche chain, so derived streams are
reproducible across runs, platforms and thread schedules.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg, special

from .core_math import as_hurst, rho
from .errors import AlignmentError, DomainError, EmbeddingError

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
CHOLESKY_MAX_N = 4096
EIGEN_CLAMP_REL = 1e-10

# SplitMix64 constants (Steele, Lea & Flood) and the starting state of the
# mixing chain (the fractional digits of pi).
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_MUL1 = 0xBF58476D1CE4E5B9
_MIX_MUL2 = 0x94D049BB133111EB
_MIX_START = 0x243F6A8885A308D3

BINARY_MAGIC = b"FBM1"
BINARY_HEADER = struct.Struct("<4sdIdQ")  # magic, H, n, delta, seed: 32 bytes


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_MUL2) & MASK64
    return z ^ (z >> 31)


def mix64(*words: int) -> int:
    """Hash a sequence of integers into a 64-bit seed.

    h_0 = 0x243F6A8885A308D3 and h_{i+1} = splitmix64(h_i XOR (w_i mod 2^64));
    the result is the final state.  Negative words are reduced mod 2^64.
    """
    h = _MIX_START
    for w in words:
        h = _splitmix64(h ^ (int(w) & MASK64))
    return h


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


class Method(str, Enum):
    CIRCULANT = "circulant"
    CHOLESKY = "cholesky"


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``n`` steps of size ``delta`` on [0, T_total]."""

    n: int
    delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"grid needs an integer n >= 2, got {self.n!r}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise DomainError(f"mesh must be positive, got {self.delta!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def T_total(self) -> float:
        return self.n * self.delta

    @classmethod
    def from_total(cls, T_total: float, n: int) -> "GridSpec":
        if not T_total > 0:
            raise DomainError(f"T_total must be positive, got {T_total!r}")
        return cls(n, T_total / n)

    @classmethod
    def covering(cls, T: float, eps_max: float, delta: float) -> "GridSpec":
        """Smallest grid of mesh ``delta`` reaching T + eps_max."""
        steps = (T + eps_max) / delta
        n = int(round(steps))
        if abs(steps - n) > 1e-9 * max(1.0, steps):
            n = math.ceil(steps)
        return cls(max(n, 2), delta)

    def steps(self, length: float, what: str = "length") -> int:
        """Number of mesh steps in ``length``; raises if it is not a multiple."""
        m = length / self.delta
        r = int(round(m))
        if r < 0 or abs(m - r) > 1e-9 * max(1.0, m):
            raise AlignmentError(f"{what} {length!r} is not a multiple of the mesh {self.delta!r}")
        return r

    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.delta


@dataclass(frozen=True, eq=False)
class FbmPath:
    H: float
    grid: GridSpec
    values: np.ndarray
    seed: int
    method: Method

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise DomainError(f"path needs {self.grid.n + 1} values, got shape {vals.shape}")
        if vals[0] != 0.0:
            raise DomainError("path must start at 0")
        if not np.all(np.isfinite(vals)):
            raise DomainError("path contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class PathPair:
    first: FbmPath
    second: FbmPath

    def __post_init__(self):
        if self.first.grid != self.second.grid:
            raise DomainError("paths of a pair must share a grid")
        if self.first.H != self.second.H:
            raise DomainError("paths of a pair must share the Hurst index")


def fgn_autocovariance(H, grid: GridSpec, lags: int) -> np.ndarray:
    """delta^{2H} rho(j) for j = 0..lags."""
    h = as_hurst(H)
    return grid.delta ** (2 * h) * rho(h, np.arange(lags + 1, dtype=float))


@lru_cache(maxsize=32)
def _circulant_sqrt(h: float, n: int, delta: float) -> np.ndarray:
    m = n
    gamma = fgn_autocovariance(h, GridSpec(max(n, 2), delta), m)
    row = np.concatenate((gamma, gamma[-2:0:-1]))
    lam = np.fft.fft(row).real
    top = lam.max()
    low = lam.min()
    if low < -EIGEN_CLAMP_REL * top:
        raise EmbeddingError(
            f"circulant embedding is indefinite: min eigenvalue {low:.3g} vs max {top:.3g}")
    if low < 0:
        log.warning("clamping %d slightly negative circulant eigenvalues (min %.3g)",
                    int(np.sum(lam < 0)), low)
        lam = np.where(lam < 0, 0.0, lam)
    scale = np.sqrt(lam / (2 * m))
    scale.setflags(write=False)
    return scale


@lru_cache(maxsize=8)
def _cholesky_factor(h: float, n: int, delta: float) -> np.ndarray:
    gamma = fgn_autocovariance(h, GridSpec(n, delta), n - 1)
    factor = linalg.cholesky(linalg.toeplitz(gamma), lower=True)
    factor.setflags(write=False)
    return factor


def _box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """Complex standard normals (independent N(0,1) real and imaginary parts)."""
    u1 = 1.0 - rng.random(size)  # (0, 1]
    u2 = rng.random(size)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(size, dtype=complex)
    out.real = radius * np.cos(angle)
    out.imag = radius * np.sin(angle)
    return out


def _inverse_cdf_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.random(size) + 2.0 ** -54  # strictly inside (0, 1)
    return special.ndtri(u)


def _parse_method(method) -> Method:
    try:
        return Method(method.value if isinstance(method, Method) else str(method).lower())
    except ValueError:
        raise DomainError(f"unknown generation method {method!r}") from None


def generate_fgn(H, grid: GridSpec, seed: int, method=Method.CIRCULANT) -> np.ndarray:
    """Stationary increments B_{(i+1)delta} - B_{i delta}, i = 0..n-1."""
    return generate_fgn_batch(H, grid, [seed], method)[0]


def generate_fgn_batch(H, grid: GridSpec, seeds, method=Method.CIRCULANT) -> np.ndarray:
    """One row of increments per seed; row i depends only on seeds[i]."""
    h = as_hurst(H)
    method = _parse_method(method)
    seeds = list(seeds)
    n = grid.n
    if method is Method.CIRCULANT:
        scale = _circulant_sqrt(h, n, grid.delta)
        size = scale.size
        z = np.empty((len(seeds), size), dtype=complex)
        for i, s in enumerate(seeds):
            z[i] = _box_muller(make_rng(s), size)
        return np.fft.fft(scale * z, axis=-1).real[:, :n]
    if n > CHOLESKY_MAX_N:
        raise DomainError(f"Cholesky sampling is limited to n <= {CHOLESKY_MAX_N}, got {n}")
    factor = _cholesky_factor(h, n, grid.delta)
    normals = np.array([_inverse_cdf_normals(make_rng(s), n) for s in seeds]).reshape(len(seeds), n)
    return normals @ factor.T


def cumulate(increments: np.ndarray) -> np.ndarray:
    """Prefix a zero and take cumulative sums along the last axis."""
    inc = np.asarray(increments, dtype=float)
    out = np.zeros(inc.shape[:-1] + (inc.shape[-1] + 1,))
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def pair_seeds(seed: int) -> tuple[int, int]:
    """Seeds of the two members of a pair: mix64(seed, 1) and mix64(seed, 2)."""
    return mix64(seed, 1), mix64(seed, 2)


def build_paths(H, grid: GridSpec, seed: int, method=Method.CIRCULANT, pair: bool = False):
    h = as_hurst(H)
    method = _parse_method(method)
    if pair:
        s1, s2 = pair_seeds(seed)
        return PathPair(build_paths(h, grid, s1, method), build_paths(h, grid, s2, method))
    values = cumulate(generate_fgn(h, grid, seed, method))
    return FbmPath(h, grid, values, int(seed) & MASK64, method)


# ---------------------------------------------------------------------------
# Dumps


def write_csv(path: FbmPath, target) -> None:
    """One row per grid point: header ``t,value``."""
    t = path.grid.times()
    with open(target, "w", encoding="ascii", newline="") as fh:
        fh.write("t,value\n")
        for ti, vi in zip(t.tolist(), path.values.tolist()):
            fh.write(f"{ti!r},{vi!r}\n")


def write_binary(path: FbmPath, target) -> None:
    """32-byte little-endian header (magic, H, n, delta, seed) then n+1 float64 values."""
    header = BINARY_HEADER.pack(BINARY_MAGIC, path.H, path.grid.n, path.grid.delta, path.seed)
    Path(target).write_bytes(header + path.values.astype("<f8").tobytes())


def read_binary(source, method=Method.CIRCULANT) -> FbmPath:
    data = Path(source).read_bytes()
    if len(data) < BINARY_HEADER.size:
        raise DomainError("binary path file is truncated")
    magic, h, n, delta, seed = BINARY_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise DomainError(f"bad magic {magic!r} in binary path file")
    values = np.frombuffer(data, dtype="<f8", offset=BINARY_HEADER.size)
    return FbmPath(h, GridSpec(n, delta), values.astype(float), seed, _parse_method(method))
