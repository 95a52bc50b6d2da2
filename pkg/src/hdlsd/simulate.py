"""Sample paths of the truncated linear process.

Innovations come from one counter-style stream per ``(seed, replicate, row)``
so every row can be generated independently of scheduling; the column index
is the position within that row's stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import INNOVATIONS, ProcessModel, SpectralParamDistribution
from .storage import read_container, write_container

__all__ = [
    "PathMatrix",
    "gen_innovations",
    "assign_lambdas",
    "random_orthogonal",
    "default_q",
    "simulate_path",
    "simulate_circulant_path",
]

# cap on p * n * (number of taps) multiply-adds per path
WORK_BUDGET = 4_000_000_000

_INNOVATION_STREAM = 0
_ROTATION_STREAM = 1


@dataclass(frozen=True)
class PathMatrix:
    entries: np.ndarray
    kind: str
    q: int
    seed: int
    replicate: int = 0
    model_hash: str = "-"

    def __post_init__(self):
        if self.kind not in ("lag", "circulant"):
            raise ValueError("kind must be 'lag' or 'circulant'")
        if self.entries.ndim != 2 or min(self.entries.shape) < 1:
            raise ValueError("entries must be a nonempty p x n array")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("path contains non-finite values")
        self.entries.setflags(write=False)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def save(self, path) -> None:
        write_container(path, self.entries, kind=self.kind, q=self.q, seed=self.seed,
                        model_hash=self.model_hash)

    @classmethod
    def load(cls, path) -> "PathMatrix":
        header, data = read_container(path)
        return cls(data, header.kind, header.q, header.seed, 0, header.model_hash)


def _row_generator(seed: int, replicate: int, row: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_INNOVATION_STREAM, replicate, row))
    return np.random.Generator(np.random.Philox(ss))


def gen_innovations(p: int, n_total: int, law: str = "real_gaussian", seed: int = 0,
                    replicate: int = 0) -> np.ndarray:
    """I.i.d. mean-zero, unit-variance innovations of shape ``(p, n_total)``.

    Complex Gaussian entries have independent real and imaginary parts of
    variance 1/2 each.
    """
    if p < 1 or n_total < 1:
        raise ValueError("p and n_total must be positive")
    if law not in INNOVATIONS:
        raise ValueError(f"unknown innovation law {law!r}")
    dtype = complex if law == "complex_gaussian" else float
    out = np.empty((p, n_total), dtype=dtype)
    for j in range(p):
        rng = _row_generator(seed, replicate, j)
        if law == "real_gaussian":
            out[j] = rng.standard_normal(n_total)
        elif law == "complex_gaussian":
            parts = rng.standard_normal((2, n_total)) * math.sqrt(0.5)
            out[j] = parts[0] + 1j * parts[1]
        elif law == "rademacher":
            out[j] = rng.integers(0, 2, n_total) * 2.0 - 1.0
        else:
            out[j] = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n_total)
    return out


def assign_lambdas(fa: SpectralParamDistribution, p: int) -> np.ndarray:
    """Deterministic largest-remainder allocation of ``p`` coordinates to atoms.

    Returns the atom index of each coordinate, grouped by atom in order.
    Ties in the fractional parts go to the lower atom index.
    """
    if p < 1:
        raise ValueError("p must be positive")
    fa.require_normalized()
    exact = fa.weights * p
    counts = np.floor(exact).astype(int)
    short = p - counts.sum()
    if short > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return np.repeat(np.arange(fa.n_atoms), counts)


def random_orthogonal(p: int, seed: int = 0, replicate: int = 0) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a seeded Gaussian QR factorization."""
    ss = np.random.SeedSequence(seed, spawn_key=(_ROTATION_STREAM, replicate))
    g = np.random.Generator(np.random.Philox(ss)).standard_normal((p, p))
    qmat, r = np.linalg.qr(g)
    return qmat * np.sign(np.diag(r))[None, :]


def default_q(model: ProcessModel, p: int) -> int:
    """Exact order for finite MA families, ``ceil(p**(1/3))`` otherwise."""
    order = model.family.finite_order
    if order is not None:
        return order
    return math.ceil(p ** (1.0 / 3.0))


def _prepare(model: ProcessModel, p: int, n: int, q: Optional[int], seed: int, replicate: int):
    if p < 1 or n < 1:
        raise ValueError("p and n must be positive")
    q = default_q(model, p) if q is None else int(q)
    if q < 0:
        raise ValueError("q must be nonnegative")
    taps = model.taps(q)[assign_lambdas(model.fa, p)]
    n_lags = taps.shape[1] - 1
    if p * n * (n_lags + 1) > WORK_BUDGET:
        raise ValueError(f"p*n*taps = {p * n * (n_lags + 1)} exceeds the work budget")
    z = gen_innovations(p, n + n_lags, model.innovation, seed, replicate)
    u = random_orthogonal(p, seed, replicate) if model.rotation == "random_orthogonal" else None
    if u is not None:
        z = u.T @ z
    return q, taps, n_lags, z, u


def simulate_path(model: ProcessModel, p: int, n: int, q: Optional[int] = None,
                  seed: int = 0, replicate: int = 0) -> PathMatrix:
    """Causal MA(q) path ``X_1..X_n`` built from innovations ``Z_(1-Q)..Z_n``.

    ``Q`` is ``q`` plus the filter order.  Column ``t - 1`` of the returned
    array is ``X_t``; the innovation array has ``n + Q`` columns and its last
    ``n`` columns are ``Z_1..Z_n``.
    """
    q, taps, n_lags, z, u = _prepare(model, p, n, q, seed, replicate)
    x = np.zeros((p, n), dtype=z.dtype)
    for lag in range(n_lags + 1):
        x += taps[:, lag:lag + 1] * z[:, n_lags - lag:n_lags - lag + n]
    if u is not None:
        x = u @ x
    return PathMatrix(x, "lag", q, seed, replicate, model.digest())


def simulate_circulant_path(model: ProcessModel, p: int, n: int, q: Optional[int] = None,
                            seed: int = 0, replicate: int = 0) -> PathMatrix:
    """Wrap-around version of :func:`simulate_path` on the innovations ``Z_1..Z_n``.

    Agrees with the lag path on every column ``t > Q``.
    """
    q, taps, n_lags, z, u = _prepare(model, p, n, q, seed, replicate)
    zc = z[:, n_lags:]
    x = np.zeros((p, n), dtype=z.dtype)
    for lag in range(n_lags + 1):
        x += taps[:, lag:lag + 1] * np.roll(zc, lag, axis=1)
    if u is not None:
        x = u @ x
    return PathMatrix(x, "circulant", q, seed, replicate, model.digest())
