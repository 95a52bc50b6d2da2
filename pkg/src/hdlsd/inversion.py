"""Densities and CDFs from Stieltjes transforms.

The density is ``Im s(x + i v) / pi`` extrapolated linearly in ``v`` to
``v = 0`` from the two smallest heights, and the CDF is its cumulative
trapezoid integral plus any point mass detected at zero.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .solver import KernelEquation, NonConvergenceError
from .storage import fmt, read_csv, write_csv

__all__ = [
    "SpectralCurve",
    "density_curve",
    "default_x_grid",
    "detect_atom_at_zero",
    "cdf_at",
    "write_curve_csv",
    "read_curve_csv",
    "DEFAULT_HEIGHTS",
]

DEFAULT_HEIGHTS = (0.004, 0.002, 0.001)

# heights used to probe for a point mass at the origin
ATOM_HEIGHTS = (1e-5, 1e-6)
ATOM_MIN_MASS = 1e-3
ATOM_STABILITY = 0.9

# excess mass above which the curve is left as is and a warning raised
RENORMALIZE_MAX = 1e-2


@dataclass(frozen=True)
class SpectralCurve:
    x_grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    atom_at_zero: float = 0.0
    v_used: tuple = DEFAULT_HEIGHTS
    flags: tuple = ()

    def __post_init__(self):
        if np.any(np.diff(self.x_grid) <= 0):
            raise ValueError("x grid must be strictly increasing")
        if np.any(np.diff(self.cdf) < -1e-12):
            raise ValueError("cdf must be nondecreasing")

    @property
    def support(self) -> tuple[float, float]:
        return float(self.x_grid[0]), float(self.x_grid[-1])

    @property
    def jumps(self) -> np.ndarray:
        return np.array([0.0]) if self.atom_at_zero > 0 else np.empty(0)

    @property
    def total_mass(self) -> float:
        return float(self.cdf[-1])

    def _continuous(self) -> np.ndarray:
        return self.cdf - self.atom_at_zero * (self.x_grid >= 0)

    def cdf_value(self, x, left: bool = False):
        x_arr = np.asarray(x, dtype=float)
        cont = np.interp(x_arr, self.x_grid, self._continuous(), left=0.0)
        step = (x_arr > 0) if left else (x_arr >= 0)
        return cont + self.atom_at_zero * step

    def cdf_left(self, x):
        out = self.cdf_value(x, left=True)
        return float(out) if np.ndim(out) == 0 else out

    # spectra.ks_distance looks for ``cdf`` as a method; the tabulated values
    # live in the ``cdf`` field, so evaluation goes through __call__.
    def __call__(self, x):
        out = self.cdf_value(x)
        return float(out) if np.ndim(out) == 0 else out


def cdf_at(curve: SpectralCurve, x, return_flag: bool = False):
    """Interpolated CDF; arguments outside the grid clamp to the end values.

    With ``return_flag`` a second value reports whether any argument was
    clamped.
    """
    x_arr = np.asarray(x, dtype=float)
    lo, hi = curve.support
    outside = (x_arr < lo) | (x_arr > hi)
    clamped = np.clip(x_arr, lo, hi)
    value = curve.cdf_value(clamped)
    value = float(value) if np.ndim(value) == 0 else value
    if return_flag:
        return value, bool(np.any(outside))
    return value


def default_x_grid(c: float, lambda_bar: float, size: int = 1024,
                   weight_bound: float = 1.0) -> np.ndarray:
    """``size`` uniform points on ``[-M, M]``, ``M = 1.2 (1 + sqrt c)^2 lambda_bar^2``."""
    m = 1.2 * (1 + math.sqrt(c)) ** 2 * lambda_bar ** 2 * weight_bound
    return np.linspace(-m, m, size)


Evaluator = Union[KernelEquation, Callable]


def _evaluate(evaluator: Evaluator, x: np.ndarray, heights: Sequence[float]) -> list:
    """Return ``s(x + i v)`` per height, raising on nonconvergence."""
    if isinstance(evaluator, KernelEquation):
        results = evaluator.solve_heights(x, heights)
        out = []
        for v, res in zip(heights, results):
            bad = np.flatnonzero(~res.converged)
            if bad.size:
                raise NonConvergenceError(
                    f"kernel solve failed at {bad.size} points, first at z={x[bad[0]]}+{v}i "
                    f"(residual {res.residual[bad[0]]:.3e})")
            out.append(res.s)
        return out
    return [np.asarray(evaluator(x + 1j * v), dtype=complex) for v in heights]


def detect_atom_at_zero(evaluator: Evaluator, heights: Sequence[float] = ATOM_HEIGHTS) -> float:
    """Point mass at zero estimated as ``v Im s(i v)`` at very small ``v``.

    The estimate is accepted only when it exceeds ``ATOM_MIN_MASS`` and is
    stable between the two probing heights (a continuous density that blows
    up at the origin makes ``v Im s(i v)`` decay like a power of ``v``).
    """
    vals = _evaluate(evaluator, np.zeros(1), heights)
    est = [v * float(s[0].imag) for v, s in zip(heights, vals)]
    if est[-1] > ATOM_MIN_MASS and est[-1] >= ATOM_STABILITY * est[0]:
        return est[-1]
    return 0.0


def density_curve(evaluator: Evaluator, x_grid, v_sequence: Sequence[float] = DEFAULT_HEIGHTS,
                  detect_atom: bool = True) -> SpectralCurve:
    """Invert a Stieltjes transform on ``x_grid``.

    ``evaluator`` is a :class:`~hdlsd.solver.KernelEquation` or any callable
    mapping an array of ``z`` to ``s(z)``.  ``v_sequence`` must be positive
    and decreasing; the two smallest heights are used for the extrapolation.
    A continuous part whose integral pushes the total mass slightly above one
    is rescaled to ``1 - atom`` and flagged ``renormalized``.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be a strictly increasing 1-d array")
    heights = tuple(float(v) for v in v_sequence)
    if len(heights) < 2 or any(v <= 0 for v in heights) or list(heights) != sorted(heights, reverse=True):
        raise ValueError("v_sequence needs at least two positive decreasing heights")

    atom = detect_atom_at_zero(evaluator) if detect_atom else 0.0
    values = _evaluate(evaluator, x, heights)
    dens = []
    for v, s in zip(heights[-2:], values[-2:]):
        d = s.imag / np.pi
        if atom > 0:
            d = d - atom * v / (np.pi * (x ** 2 + v ** 2))
        dens.append(d)
    v1, v2 = heights[-2:]
    d1, d2 = dens
    density = d2 + (d2 - d1) * v2 / (v1 - v2)
    density = np.maximum(density, 0.0)

    cont = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(x))])
    flags = []
    total = cont[-1] + atom
    if total > 1 + RENORMALIZE_MAX:
        warnings.warn(f"inverted distribution has total mass {total:.4f} > 1", RuntimeWarning)
    elif total > 1 and cont[-1] > 0:
        # quadrature overshoot at sharp edges; a probability measure cannot exceed 1
        scale = (1 - atom) / cont[-1]
        density, cont = density * scale, cont * scale
        flags.append("renormalized")
    cdf = cont + atom * (x >= 0)
    if abs(cdf[-1] - 1) > 1e-2:
        # typically an unresolved edge singularity or a grid not covering the support
        flags.append("mass_defect")
    return SpectralCurve(x, density, cdf, atom, heights, tuple(flags))


def write_curve_csv(path, curve: SpectralCurve) -> None:
    write_csv(path, ["x", "density", "cdf"], [curve.x_grid, curve.density, curve.cdf],
              comments=[f"atom0={fmt(curve.atom_at_zero)}"])


def read_curve_csv(path) -> SpectralCurve:
    cols, comments = read_csv(path)
    atom = float(comments.get("atom0", 0.0))
    return SpectralCurve(cols["x"], cols["density"], cols["cdf"], atom)
