"""Brownian-motion ensembles on uniform time grids, with a binary file format."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"BSDE"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQIIdQ")


class EnsembleFormatError(ValueError):
    """Bad magic bytes, version, or header fields."""


class EnsembleLengthError(ValueError):
    """Payload size disagrees with the header."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i T / N on [0, T]."""

    T: float
    N: int

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError("horizon T must be positive and finite")
        if self.N < 1:
            raise ValueError("step count N must be >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass(frozen=True)
class PathEnsemble:
    M: int
    d: int
    grid: TimeGrid
    seed: int
    increments: np.ndarray = field(repr=False)  # (M, N, d)
    values: np.ndarray = field(repr=False)      # (M, N+1, d), values[:, 0] = 0
    antithetic: bool = False


def _cumulate(increments: np.ndarray) -> np.ndarray:
    m, _, d = increments.shape
    values = np.concatenate(
        [np.zeros((m, 1, d)), np.cumsum(increments, axis=1)], axis=1)
    return values


def generate_ensemble(M: int, N: int, d: int, T: float, seed: int,
                      antithetic: bool = False) -> PathEnsemble:
    """Simulate M independent d-dimensional Brownian paths on N uniform steps.

    Increments come from per-path Philox substreams jumped from (seed, path
    index), so the result is a pure function of (seed, M, N, d, T) regardless
    of how generation is scheduled.  With antithetic=True, path 2j+1 is the
    negation of path 2j.
    """
    if M < 1 or N < 1 or d < 1:
        raise ValueError("M, N, d must all be >= 1")
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must fit in 64 bits")
    grid = TimeGrid(T=float(T), N=int(N))
    try:
        increments = np.empty((M, N, d))
    except MemoryError as exc:
        raise MemoryError(
            f"cannot allocate ensemble of {M}x{N}x{d} float64 increments") from exc

    root = np.random.Philox(key=seed)
    scale = math.sqrt(grid.dt)
    for j in range(M):
        if antithetic and j % 2 == 1:
            increments[j] = -increments[j - 1]
        else:
            rng = np.random.Generator(root.jumped(j))
            increments[j] = scale * rng.standard_normal((N, d))

    return PathEnsemble(M=M, d=d, grid=grid, seed=seed,
                        increments=increments, values=_cumulate(increments),
                        antithetic=antithetic)


def save_ensemble(ens: PathEnsemble, path) -> None:
    """Write the binary format: magic 'BSDE', version, sizes, T, seed, raw f64."""
    header = _HEADER.pack(_MAGIC, _VERSION, ens.M, ens.grid.N, ens.d, 0,
                          ens.grid.T, ens.seed)
    payload = np.ascontiguousarray(ens.increments, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_ensemble(path) -> PathEnsemble:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise EnsembleLengthError("file shorter than the ensemble header")
    magic, version, m, n, d, placeholder, horizon, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise EnsembleFormatError(f"bad magic bytes {magic!r}")
    if version != _VERSION:
        raise EnsembleFormatError(f"unsupported format version {version}")
    if placeholder != 0:
        raise EnsembleFormatError("reserved header field must be zero")
    expected = m * n * d * 8
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise EnsembleLengthError(
            f"payload holds {len(body)} bytes, header implies {expected}")
    increments = np.frombuffer(body, dtype="<f8").astype(float).reshape(m, n, d)
    grid = TimeGrid(T=horizon, N=n)
    return PathEnsemble(M=m, d=d, grid=grid, seed=seed,
                        increments=increments, values=_cumulate(increments))
