"""Eigenvalues, empirical spectral distributions and distances between CDFs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .storage import read_csv, write_csv

__all__ = [
    "ESD",
    "eigenvalues",
    "esd_cdf",
    "empirical_stieltjes",
    "ks_distance",
    "write_esd_csv",
    "read_esd_csv",
]

MAX_DIM = 4096


def eigenvalues(h, cap: int = MAX_DIM, hermitian_tol: float = 1e-10,
                check_residual: bool = False) -> np.ndarray:
    """Sorted eigenvalues of a Hermitian matrix (LAPACK ``*heevd``/``*syevd``).

    With ``check_residual`` every pair is verified to satisfy
    ``||H v - sigma v|| <= 1e-8 ||H||``.
    """
    h = np.asarray(getattr(h, "matrix", h))
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    p = h.shape[0]
    if p > cap:
        raise ValueError(f"dimension {p} exceeds the eigensolver cap {cap}")
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    if float(np.abs(h - h.conj().T).max(initial=0.0)) > hermitian_tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    if not check_residual:
        return np.linalg.eigvalsh(h)
    w, v = np.linalg.eigh(h)
    norm = float(np.abs(w).max(initial=0.0))
    resid = np.linalg.norm(h @ v - v * w[None, :], axis=0)
    if np.any(resid > 1e-8 * max(norm, np.finfo(float).tiny)):
        raise np.linalg.LinAlgError(f"eigenpair residual {resid.max():.3e} too large")
    return w


@dataclass(frozen=True)
class ESD:
    """Empirical spectral distribution of a ``p x p`` Hermitian matrix."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float).ravel())
        if ev.size == 0 or not np.all(np.isfinite(ev)):
            raise ValueError("ESD needs a nonempty set of finite eigenvalues")
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def of(cls, matrix, **kwargs) -> "ESD":
        return cls(eigenvalues(matrix, **kwargs))

    @property
    def p(self) -> int:
        return self.eigenvalues.size

    @property
    def jumps(self) -> np.ndarray:
        return self.eigenvalues

    @property
    def support(self) -> tuple[float, float]:
        return float(self.eigenvalues[0]), float(self.eigenvalues[-1])

    def cdf(self, x):
        out = np.searchsorted(self.eigenvalues, x, side="right") / self.p
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, x):
        out = np.searchsorted(self.eigenvalues, x, side="left") / self.p
        return float(out) if np.ndim(out) == 0 else out


def esd_cdf(esd: ESD, x):
    """Right-continuous ``(1/p) #{j : sigma_j <= x}``."""
    return esd.cdf(x)


def empirical_stieltjes(esd: ESD, z):
    """``(1/p) sum_j 1 / (sigma_j - z)`` for ``Im z > 0``."""
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr.imag <= 0):
        raise ValueError("Stieltjes transform needs Im z > 0")
    out = (1.0 / (esd.eigenvalues[:, None] - z_arr.ravel()[None, :])).mean(axis=0)
    return complex(out[0]) if z_arr.ndim == 0 else out.reshape(z_arr.shape)


def _eval(f, x, left: bool):
    if left and callable(getattr(f, "cdf_left", None)):
        return np.asarray(f.cdf_left(x), dtype=float)
    if callable(getattr(f, "cdf", None)):
        return np.asarray(f.cdf(x), dtype=float)
    return np.asarray(f(x), dtype=float)


def ks_distance(f, g, grid=None, n_uniform: int = 2048) -> float:
    """Sup distance between two CDFs.

    ``f`` and ``g`` are callables or objects with a ``cdf`` method (and optionally
    ``cdf_left``, ``jumps``, ``support``).  The supremum is taken over
    ``grid``, the jump points of both arguments (with both one-sided limits)
    and, when ``grid`` is None, a uniform grid of ``n_uniform`` points over
    the combined support.  Exact when one side is a step function and the
    other is continuous and nondecreasing between the step points.
    """
    pts = []
    jumps = [np.asarray(getattr(d, "jumps", ()), dtype=float).ravel() for d in (f, g)]
    if grid is None:
        ends = [x for d in (f, g) if hasattr(d, "support") for x in d.support]
        ends += [float(j.min()) for j in jumps if j.size] + [float(j.max()) for j in jumps if j.size]
        if not ends:
            raise ValueError("no grid given and neither argument exposes a support")
        lo, hi = min(ends), max(ends)
        pad = 0.05 * (hi - lo) + 1e-12
        pts.append(np.linspace(lo - pad, hi + pad, n_uniform))
    else:
        grid = np.asarray(grid, dtype=float).ravel()
        if grid.size == 0:
            raise ValueError("empty evaluation grid")
        pts.append(grid)
    pts.extend(jumps)
    x = np.unique(np.concatenate(pts))
    right = np.abs(_eval(f, x, False) - _eval(g, x, False))
    left = np.abs(_eval(f, x, True) - _eval(g, x, True))
    return float(max(right.max(), left.max()))


def write_esd_csv(path, esd: ESD) -> None:
    write_csv(path, ["sigma"], [esd.eigenvalues])


def read_esd_csv(path) -> ESD:
    cols, _ = read_csv(path)
    return ESD(cols["sigma"])
