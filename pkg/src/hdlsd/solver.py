"""Stieltjes-kernel equations for limiting spectral distributions.

For a weight function ``w(nu)`` (``cos(tau nu)`` for lag-``tau``
autocovariances, the taper symbol ``f_T(eta - nu)`` for tapered spectral
estimators) the kernel satisfies

    K(z, nu) = sum_a pi_a h_a(nu) / (U_a(K) - z),
    U_a(K)   = mean_k  w(nu_k) h_a(nu_k) / (1 + c w(nu_k) K(z, nu_k)),

and the Stieltjes transform of the limit is ``s(z) = sum_a pi_a / (U_a - z)``.
The frequency integral is a midpoint rule on a uniform grid and the
``F^A`` integral is an exact sum over atoms ``a`` with weights ``pi_a``.

Because ``K`` is a combination of the rows ``h_a`` with coefficients
``y_a = pi_a / (U_a - z)``, the equation is solved for ``y`` (one unknown
per atom) by Newton's method, following the Herglotz branch by continuation
from large ``Im z``.  ``method="fixed_point"`` instead runs the damped
iteration ``K <- (1 - d) K + d Phi(K)`` directly on the kernel grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ProcessModel, TaperSpec, taper_symbol
from .storage import write_csv

__all__ = [
    "SolverConfig",
    "StieltjesKernelGrid",
    "KernelEquation",
    "SolveResult",
    "NonConvergenceError",
    "midpoint_grid",
    "mass_mnu",
    "uniqueness_threshold",
    "solve_kernel",
    "stieltjes_lsd",
    "solve_tapered_kernel",
    "stieltjes_tapered",
    "deterministic_equivalent_Hn",
    "write_kernel_csv",
    "write_transform_csv",
]


# masses below this fraction of the largest one are roundoff zeros (|psi|^2 ~ eps^2)
ZERO_MASS_RTOL = 1e-28


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    nu_grid_size: int = 512
    tol: float = 1e-10
    max_iter: int = 5000
    damping: float = 0.5
    continuation_factor: float = 0.7
    v_start_multiplier: float = 1.0
    method: str = "newton"
    newton_max_iter: int = 60

    def __post_init__(self):
        if self.nu_grid_size < 8 or self.nu_grid_size % 2:
            raise ValueError("nu_grid_size must be even and at least 8")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 < self.continuation_factor < 1:
            raise ValueError("continuation_factor must lie in (0, 1)")
        if self.v_start_multiplier < 1:
            raise ValueError("v_start_multiplier must be at least 1")
        if self.method not in ("newton", "fixed_point"):
            raise ValueError("method must be 'newton' or 'fixed_point'")

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SolverConfig":
        return cls(**(d or {}))

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def midpoint_grid(size: int) -> np.ndarray:
    """``2 pi (k + 1/2) / size`` for ``k = 0..size-1``; symmetric under ``nu -> 2 pi - nu``."""
    return 2 * np.pi * (np.arange(size) + 0.5) / size


@dataclass
class StieltjesKernelGrid:
    z: complex
    nu: np.ndarray
    values: np.ndarray
    converged: bool
    iterations: int
    residual: float
    clipped: bool = False

    def mass(self) -> np.ndarray:
        """``-i v K(i v, nu)``, which tends to the kernel mass as ``v`` grows."""
        return -1j * self.z.imag * self.values


@dataclass
class SolveResult:
    """Batched solution for an array of spectral arguments ``z``."""

    z: np.ndarray
    kernel: np.ndarray
    s: np.ndarray
    converged: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    clipped: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))


def uniqueness_threshold(lambda_bar: float, c: float, weight_bound: float = 1.0) -> float:
    """``4 lambda_bar^2 max(c^(3/4), sqrt(c))``, scaled by the sup of ``|w|``.

    Above this height the kernel map contracts, so its fixed point is unique.
    """
    return 4.0 * lambda_bar ** 2 * weight_bound * max(c ** 0.75, math.sqrt(c))


class KernelEquation:
    """The discretized kernel equation for fixed model data.

    Parameters
    ----------
    h : (A, N) array
        Effective power transfer ``g_B(lam_a) zeta(nu_k) h(lam_a, nu_k)``.
    weights : (A,) array
        Atom probabilities ``pi_a``.
    w : (N,) array
        Frequency weight ``w(nu_k)``.
    c : float
        Dimension-to-sample-size ratio.
    nu : (N,) array
        Quadrature nodes (equal weights ``1/N``).
    lambda_bar : float
        Coefficient bound used for the continuation starting height.
    """

    def __init__(self, h, weights, w, c: float, nu, lambda_bar: float,
                 config: Optional[SolverConfig] = None):
        if not c > 0:
            raise ValueError("c must be positive")
        self.h = np.asarray(h, dtype=float)
        self.pi = np.asarray(weights, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.nu = np.asarray(nu, dtype=float)
        self.c = float(c)
        self.lambda_bar = float(lambda_bar)
        self.config = config or SolverConfig()
        if self.h.shape != (self.pi.size, self.w.size) or self.nu.size != self.w.size:
            raise ValueError("inconsistent kernel equation shapes")
        if abs(self.pi.sum() - 1.0) > 1e-12:
            raise ValueError("atom weights must sum to 1")
        self.n_nodes = self.w.size

    # -- construction -------------------------------------------------------

    @classmethod
    def lag(cls, model: ProcessModel, c: float, tau: int,
            config: Optional[SolverConfig] = None) -> "KernelEquation":
        """Equation for the lag-``tau`` symmetrized autocovariance."""
        config = config or SolverConfig()
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        model.fa.require_normalized()
        nu = midpoint_grid(config.nu_grid_size)
        return cls(model.h_matrix(nu), model.fa.weights, np.cos(tau * nu), c, nu,
                   model.lambda_bar(), config)

    @classmethod
    def tapered(cls, model: ProcessModel, c: float, taper: TaperSpec, eta: float,
                config: Optional[SolverConfig] = None) -> "KernelEquation":
        """Equation for the tapered spectral estimator at frequency ``eta``."""
        config = config or SolverConfig()
        model.fa.require_normalized()
        nu = midpoint_grid(config.nu_grid_size)
        w = np.asarray(taper_symbol(taper, np.mod(eta - nu, 2 * np.pi)))
        return cls(model.h_matrix(nu), model.fa.weights, w, c, nu, model.lambda_bar(), config)

    @property
    def weight_bound(self) -> float:
        return max(1.0, float(np.abs(self.w).max()))

    def v_start(self) -> float:
        return self.config.v_start_multiplier * uniqueness_threshold(
            self.lambda_bar, self.c, self.weight_bound)

    def mass(self) -> np.ndarray:
        """Kernel masses ``m_nu = sum_a pi_a h_a(nu)`` on the grid."""
        return self.pi @ self.h

    # -- maps ---------------------------------------------------------------

    def _u(self, kernel: np.ndarray) -> np.ndarray:
        q = self.w / (1.0 + self.c * self.w * kernel)
        return q @ self.h.T / self.n_nodes

    def phi(self, kernel: np.ndarray, z) -> np.ndarray:
        """Right-hand side of the kernel equation, batched over leading axis."""
        z = np.asarray(z, dtype=complex)
        u = self._u(kernel)
        return (self.pi / (u - z[..., None])) @ self.h

    def transform(self, kernel: np.ndarray, z) -> np.ndarray:
        """``s(z) = sum_a pi_a / (U_a(K) - z)``."""
        z = np.asarray(z, dtype=complex)
        u = self._u(kernel)
        return (self.pi / (u - z[..., None])).sum(axis=-1)

    def atom_resolvent(self, kernel: np.ndarray, z) -> np.ndarray:
        """``1 / (U_a(K) - z)`` per atom."""
        z = np.asarray(z, dtype=complex)
        return 1.0 / (self._u(kernel) - z[..., None])

    def residual(self, kernel: np.ndarray, z) -> np.ndarray:
        return np.abs(self.phi(kernel, z) - kernel).max(axis=-1)

    # -- Newton on the atom coefficients -------------------------------------

    def _newton_state(self, y, z):
        kernel = y @ self.h
        d = 1.0 + self.c * self.w * kernel
        u = (self.w / d) @ self.h.T / self.n_nodes
        denom = u - z[:, None]
        g = y - self.pi / denom
        resid = np.maximum(np.abs(g @ self.h).max(axis=1), np.abs(g).max(axis=1))
        return kernel, d, denom, g, resid

    def _newton(self, z, y, tol):
        """Newton iterations for every row of ``y``; returns ``(y, resid, ok, iters)``.

        Steps are backtracked until the residual decreases and the kernel stays
        in the closed upper half plane; rows without such a step stop early.
        """
        n_iter = np.zeros(z.size, dtype=int)
        kernel, d, denom, g, resid = self._newton_state(y, z)
        stalled = np.zeros(z.size, dtype=bool)
        for _ in range(self.config.newton_max_iter):
            todo = np.flatnonzero((resid > tol) & ~stalled)
            if todo.size == 0:
                break
            zt, yt = z[todo], y[todo]
            m = (self.w / d[todo]) ** 2
            du = -(self.c / self.n_nodes) * ((self.h[None] * m[:, None, :]) @ self.h.T)
            jac = np.eye(self.pi.size)[None] + (self.pi / denom[todo] ** 2)[:, :, None] * du
            try:
                step = np.linalg.solve(jac, g[todo][:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = g[todo]
            alpha = np.ones(todo.size)
            new_y = yt.copy()
            best = resid[todo].copy()
            pending = np.ones(todo.size, dtype=bool)
            for _ in range(16):
                cand = yt - alpha[:, None] * step
                kc, _, _, _, rc = self._newton_state(cand, zt)
                good = pending & np.isfinite(rc) & (rc < best) & (kc.imag.min(axis=1) >= -tol)
                new_y[good], best[good] = cand[good], rc[good]
                pending &= ~good
                if not pending.any():
                    break
                alpha[pending] *= 0.5
            y[todo] = new_y
            n_iter[todo] += 1
            stalled[todo[pending]] = True
            kernel, d, denom, g, resid = self._newton_state(y, z)
        return y, resid, resid <= tol, n_iter

    def _newton_continuation(self, z, factor, y0=None, v0=None):
        tol = self.config.tol
        v_target = z.imag
        v0 = np.maximum(self.v_start() if v0 is None else v0, v_target)
        steps = int(np.ceil(np.max(np.log(v_target / v0) / np.log(factor)))) if z.size else 0
        zk = z.real + 1j * v0
        y = -self.pi[None, :] / zk[:, None] if y0 is None else y0.copy()
        total = np.zeros(z.size, dtype=int)
        ok = np.ones(z.size, dtype=bool)
        resid = np.zeros(z.size)
        for k in range(steps + 1):
            vk = np.maximum(v0 * factor ** k, v_target)
            zk = z.real + 1j * vk
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                break
            y_new, r, good, it = self._newton(zk[idx], y[idx], tol)
            y[idx] = y_new
            resid[idx] = r
            total[idx] += it
            ok[idx] = good
        return y, resid, ok, total

    # -- damped fixed point on the kernel grid -------------------------------

    def iterate(self, z, kernel0, damping: Optional[float] = None, max_iter: Optional[int] = None):
        """Damped fixed-point iteration from ``kernel0`` at fixed ``z`` (batched).

        Imaginary parts falling below ``-tol`` are clipped to zero and flagged.
        Returns ``(kernel, resid, converged, iterations, clipped)``.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        kernel = np.array(np.broadcast_to(kernel0, (z.size, self.n_nodes)), dtype=complex)
        d = self.config.damping if damping is None else damping
        max_iter = self.config.max_iter if max_iter is None else max_iter
        tol = self.config.tol
        iters = np.zeros(z.size, dtype=int)
        clipped = np.zeros(z.size, dtype=bool)
        active = np.ones(z.size, dtype=bool)
        resid = np.full(z.size, np.inf)
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            new = self.phi(kernel[idx], z[idx])
            resid[idx] = np.abs(new - kernel[idx]).max(axis=1)
            done = resid[idx] <= tol
            step = (1 - d) * kernel[idx] + d * new
            neg = step.imag < -tol
            if neg.any():
                clipped[idx[neg.any(axis=1)]] = True
                step = np.where(neg, step.real + 0j, step)
            kernel[idx[~done]] = step[~done]
            iters[idx[~done]] += 1
            active[idx[done]] = False
        resid = self.residual(kernel, z)
        return kernel, resid, resid <= tol, iters, clipped

    def _fixed_point_continuation(self, z, factor):
        v_target = z.imag
        v0 = np.maximum(self.v_start(), v_target)
        steps = int(np.ceil(np.max(np.log(v_target / v0) / np.log(factor)))) if z.size else 0
        zk = z.real + 1j * v0
        kernel = (-self.pi[None, :] / zk[:, None]) @ self.h
        total = np.zeros(z.size, dtype=int)
        clipped = np.zeros(z.size, dtype=bool)
        ok = np.ones(z.size, dtype=bool)
        resid = np.zeros(z.size)
        for k in range(steps + 1):
            zk = z.real + 1j * np.maximum(v0 * factor ** k, v_target)
            kernel, resid, ok_k, it, cl = self.iterate(zk, kernel)
            total += it
            clipped |= cl
            ok &= ok_k
        return kernel, resid, ok, total, clipped

    # -- public solve --------------------------------------------------------

    def solve(self, z, initial: Optional[np.ndarray] = None) -> SolveResult:
        """Solve at every ``z`` (``Im z > 0``).

        Without ``initial`` the Herglotz branch is tracked by continuation from
        ``v_start()`` down to ``Im z``.  With ``initial`` (a kernel grid) the
        configured method runs at ``z`` directly from that start.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        if np.any(z.imag <= 0):
            raise ValueError("kernel equation needs Im z > 0")
        cfg = self.config
        clipped = np.zeros(z.size, dtype=bool)
        if initial is not None:
            kernel, resid, ok, iters, clipped = self.iterate(z, initial)
            return self._result(z, kernel, ok, iters, clipped)
        if cfg.method == "fixed_point":
            kernel, resid, ok, iters, clipped = self._fixed_point_continuation(
                z, cfg.continuation_factor)
            return self._result(z, kernel, ok, iters, clipped)

        y, resid, ok, iters = self._newton_continuation(z, cfg.continuation_factor)
        # retry stragglers with finer continuation, then plain damped iteration
        for factor in (cfg.continuation_factor ** 0.25, cfg.continuation_factor ** 0.0625):
            bad = np.flatnonzero(~ok)
            if bad.size == 0:
                break
            yb, rb, okb, itb = self._newton_continuation(z[bad], factor)
            y[bad], resid[bad], ok[bad] = yb, rb, okb
            iters[bad] += itb
        kernel = y @ self.h
        bad = np.flatnonzero(~ok)
        if bad.size:
            kb, rb, okb, itb, clb = self.iterate(z[bad], kernel[bad])
            kernel[bad], ok[bad], clipped[bad] = kb, okb, clb
            iters[bad] += itb
        return self._result(z, kernel, ok, iters, clipped)

    def solve_heights(self, x, heights: Sequence[float]) -> list:
        """Solve at ``x + i v`` for each ``v`` in ``heights`` (decreasing).

        One continuation path is shared: the solution at each height warm-starts
        the descent to the next.  Points that fail fall back to :meth:`solve`.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        heights = [float(v) for v in heights]
        if any(v <= 0 for v in heights) or heights != sorted(heights, reverse=True):
            raise ValueError("heights must be positive and decreasing")
        factor = self.config.continuation_factor
        out = []
        y, v_prev = None, None
        for v in heights:
            z = x + 1j * v
            if y is None:
                y, _, ok, iters = self._newton_continuation(z, factor)
            else:
                y, _, ok, iters = self._newton_continuation(z, factor, y0=y, v0=v_prev)
            kernel = y @ self.h
            res = self._result(z, kernel, ok, iters, np.zeros(z.size, dtype=bool))
            bad = np.flatnonzero(~res.converged)
            if bad.size:
                fix = self.solve(z[bad])
                for name in ("kernel", "s", "converged", "residual", "iterations", "clipped"):
                    getattr(res, name)[bad] = getattr(fix, name)
                y[bad] = self.pi[None, :] * self.atom_resolvent(fix.kernel, z[bad])
            out.append(res)
            v_prev = v
        return out

    def _result(self, z, kernel, ok, iters, clipped) -> SolveResult:
        # frequencies of vanishing mass (up to roundoff in |psi|^2) carry an exactly zero kernel
        mass = self.mass()
        kernel = np.where(mass[None, :] <= ZERO_MASS_RTOL * mass.max(), 0.0, kernel)
        resid = self.residual(kernel, z)
        ok = ok & (resid <= self.config.tol)
        s = self.transform(kernel, z)
        return SolveResult(z, kernel, s, ok, resid, iters, clipped)

    def solve_grid(self, z: complex, initial=None) -> StieltjesKernelGrid:
        res = self.solve(z, initial)
        return StieltjesKernelGrid(complex(res.z[0]), self.nu, res.kernel[0], bool(res.converged[0]),
                                   int(res.iterations[0]), float(res.residual[0]),
                                   bool(res.clipped[0]))


# -- operation-level wrappers -------------------------------------------------


def mass_mnu(model: ProcessModel, nu):
    """Kernel mass ``m_nu = sum_a pi_a g_B(lam_a) zeta(nu) h(lam_a, nu)``."""
    out = model.fa.weights @ model.h_matrix(nu)
    return float(out[0]) if np.ndim(nu) == 0 else out


def _check_z(z, c):
    if not c > 0:
        raise ValueError("c must be positive")
    if complex(z).imag <= 0:
        raise ValueError("kernel equation needs Im z > 0")


def solve_kernel(model: ProcessModel, c: float, tau: int, z: complex,
                 config: Optional[SolverConfig] = None, initial=None) -> StieltjesKernelGrid:
    """Stieltjes kernel ``K_tau(z, .)`` on the midpoint frequency grid."""
    _check_z(z, c)
    return KernelEquation.lag(model, c, tau, config).solve_grid(z, initial)


def _transform_from_grid(eq: KernelEquation, z: complex, kernel: StieltjesKernelGrid) -> complex:
    if not kernel.converged:
        raise NonConvergenceError(
            f"kernel at z={kernel.z} did not converge (residual {kernel.residual:.3e})")
    if kernel.values.shape != eq.nu.shape or abs(kernel.z - complex(z)) > 0:
        raise ValueError("kernel grid does not match this equation and z")
    return complex(eq.transform(kernel.values, np.asarray(z)))


def stieltjes_lsd(model: ProcessModel, c: float, tau: int, z: complex,
                  kernel: Optional[StieltjesKernelGrid] = None,
                  config: Optional[SolverConfig] = None) -> complex:
    """Limiting Stieltjes transform ``s_tau(z)``; solves for the kernel if not given."""
    _check_z(z, c)
    eq = KernelEquation.lag(model, c, tau, config)
    if kernel is None:
        kernel = eq.solve_grid(z)
    return _transform_from_grid(eq, z, kernel)


def solve_tapered_kernel(model: ProcessModel, c: float, taper: TaperSpec, eta: float,
                         z: complex, config: Optional[SolverConfig] = None,
                         initial=None) -> StieltjesKernelGrid:
    _check_z(z, c)
    return KernelEquation.tapered(model, c, taper, eta, config).solve_grid(z, initial)


def stieltjes_tapered(model: ProcessModel, c: float, taper: TaperSpec, eta: float, z: complex,
                      kernel: Optional[StieltjesKernelGrid] = None,
                      config: Optional[SolverConfig] = None) -> complex:
    _check_z(z, c)
    eq = KernelEquation.tapered(model, c, taper, eta, config)
    if kernel is None:
        kernel = eq.solve_grid(z)
    return _transform_from_grid(eq, z, kernel)


def deterministic_equivalent_Hn(model: ProcessModel, lambdas, n: int, tau: int, z: complex,
                                config: Optional[SolverConfig] = None) -> np.ndarray:
    """Diagonal of the finite-``n`` deterministic equivalent ``H_{tau,p}(z)``.

    The kernel is solved on the Fourier frequencies ``2 pi t / n``,
    ``t = 1..n``, with ``c_n = p / n`` and the empirical distribution of the
    ``p`` given parameter vectors.
    """
    config = config or SolverConfig()
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim == 1:
        lambdas = lambdas[:, None]
    p = lambdas.shape[0]
    _check_z(z, p / n)
    atoms, inverse, counts = np.unique(lambdas, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    weights = counts / p
    weights = weights / weights.sum()
    nu = 2 * np.pi * np.arange(1, n + 1) / n
    h = model.h_matrix(nu, atoms=atoms)
    eq = KernelEquation(h, weights, np.cos(tau * nu), p / n, nu, model.lambda_bar(), config)
    res = eq.solve(z)
    if not res.converged[0]:
        raise NonConvergenceError(f"finite-n kernel at z={z} did not converge")
    u = eq._u(res.kernel)[0]
    return (-u / complex(z))[inverse]


def write_kernel_csv(path, kernel: StieltjesKernelGrid) -> None:
    write_csv(path, ["nu", "re_K", "im_K"], [kernel.nu, kernel.values.real, kernel.values.imag])


def write_transform_csv(path, z, s) -> None:
    z = np.asarray(z, dtype=complex)
    s = np.asarray(s, dtype=complex)
    write_csv(path, ["re_z", "im_z", "re_s", "im_s"], [z.real, z.imag, s.real, s.imag])
