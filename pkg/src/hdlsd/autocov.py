"""Symmetrized sample autocovariances and tapered spectral-density matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import TaperSpec
from .simulate import PathMatrix

__all__ = ["SymAutocov", "TaperedSpectralMatrix", "sym_autocov", "tapered_spectral"]


@dataclass(frozen=True)
class SymAutocov:
    matrix: np.ndarray
    lag: int
    source: str = ""

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class TaperedSpectralMatrix:
    matrix: np.ndarray
    frequency: float
    taper: TaperSpec

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def _entries(path: Union[PathMatrix, np.ndarray]) -> np.ndarray:
    x = path.entries if isinstance(path, PathMatrix) else np.asarray(path)
    if x.ndim != 2:
        raise ValueError("path must be a p x n array")
    return x


def _lag_product(x: np.ndarray, tau: int) -> np.ndarray:
    """``(1/n) sum_{t=1}^{n-tau} X_t X_{t+tau}^*``."""
    n = x.shape[1]
    return (x[:, :n - tau] @ x[:, tau:].conj().T) / n


def sym_autocov(path, tau: int) -> SymAutocov:
    """``C_tau = (1/2n) sum_{t=1}^{n-tau} (X_t X_{t+tau}^* + X_{t+tau} X_t^*)``."""
    x = _entries(path)
    n = x.shape[1]
    if not 0 <= tau < n:
        raise ValueError(f"lag {tau} outside [0, {n})")
    prod = _lag_product(x, tau)
    c = 0.5 * (prod + prod.conj().T)
    src = f"{path.kind}:seed={path.seed}" if isinstance(path, PathMatrix) else "array"
    return SymAutocov(c, tau, src)


def tapered_spectral(path, taper: TaperSpec, eta: float) -> TaperedSpectralMatrix:
    """Tapered estimator ``sum_tau T_n(tau) e^(i tau eta) (1/n) sum_t X_t X_{t+tau}^*``.

    Lags ``+tau`` and ``-tau`` are paired, so the result is Hermitian by
    construction.  The lag-0 term is exactly ``sym_autocov(path, 0)``.
    """
    if not 0 <= eta <= 2 * np.pi:
        raise ValueError("eta must lie in [0, 2*pi]")
    x = _entries(path)
    n = x.shape[1]
    g = sym_autocov(x, 0).matrix
    w = taper.weights(n)
    lags = np.flatnonzero(w[1:]) + 1
    if lags.size == 0:
        return TaperedSpectralMatrix(g, float(eta), taper)

    p = x.shape[0]
    if lags.size * p <= n + p:
        off = np.zeros((p, p), dtype=complex)
        for tau in lags:
            off += (w[tau] * np.exp(1j * tau * eta)) * _lag_product(x, int(tau))
        return TaperedSpectralMatrix(g + (off + off.conj().T), float(eta), taper)

    # Toeplitz weight matrix W[s, t] = T(t - s) e^{i (t - s) eta}, zero diagonal
    kernel = np.zeros(n, dtype=complex)
    kernel[lags] = w[lags] * np.exp(1j * lags * eta)
    idx = np.arange(n)
    diff = idx[None, :] - idx[:, None]
    wmat = np.where(diff > 0, kernel[np.abs(diff)], np.conj(kernel[np.abs(diff)]))
    off = (x @ wmat @ x.conj().T) / n
    return TaperedSpectralMatrix(g + 0.5 * (off + off.conj().T), float(eta), taper)
