"""Process specifications for high-dimensional linear time series.

A process is described in the rotated coordinate system where every
coefficient matrix is diagonal: coordinate ``j`` carries a parameter vector
``lambda_j`` and the lag-``l`` coefficient of that coordinate is
``f_l(lambda_j)``.  Everything in this module is deterministic.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

__all__ = [
    "CoefficientFamily",
    "SpectralParamDistribution",
    "ProcessModel",
    "TaperSpec",
    "AssumptionReport",
    "INNOVATIONS",
    "ROTATIONS",
    "arma11_coeff",
    "psi",
    "power_transfer",
    "effective_h",
    "taper_symbol",
    "validate_assumptions",
    "default_q_max",
]

INNOVATIONS = ("real_gaussian", "complex_gaussian", "rademacher", "uniform")
ROTATIONS = ("identity", "random_orthogonal")

FAMILY_KINDS = ("identity", "ma", "arma11", "table")


def default_q_max(p: Optional[int] = None) -> int:
    """Truncation order for infinite-order families, ``max(64, ceil(p**(1/3)))``."""
    if p is None:
        return 64
    return max(64, math.ceil(p ** (1.0 / 3.0)))


def arma11_coeff(phi: float, theta: float, lag: int) -> float:
    """MA(infinity) coefficient of a causal scalar ARMA(1,1) at ``lag``.

    Returns 1 at lag 0 and ``(theta + phi) * phi**(lag - 1)`` otherwise.
    """
    if abs(phi) >= 1:
        raise ValueError(f"ARMA(1,1) requires |phi| < 1 for causality, got {phi}")
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    if lag == 0:
        return 1.0
    return (theta + phi) * phi ** (lag - 1)


@dataclass(frozen=True)
class CoefficientFamily:
    """Lag coefficients ``f_l(lambda)`` as functions of a parameter vector.

    kind
        ``identity``: ``f_l = 0`` for ``l >= 1`` (i.i.d. observations).
        ``ma``: finite MA(q) where ``lambda = (f_1, ..., f_q)``.
        ``arma11``: ``lambda = (phi, theta)``, infinite order, truncated at
        ``q_max``.
        ``table``: explicit coefficient sequences ``coeffs[k]`` attached to the
        parameter vectors ``keys[k]``; ``coeffs[k, 0]`` is ``f_0``.
    """

    kind: str
    q_max: int = 64
    keys: Optional[np.ndarray] = field(default=None, compare=False)
    coeffs: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown coefficient family {self.kind!r}")
        if self.q_max < 0:
            raise ValueError("q_max must be nonnegative")
        if self.kind == "table":
            if self.keys is None or self.coeffs is None:
                raise ValueError("table family needs keys and coeffs")
            keys = np.atleast_2d(np.asarray(self.keys, dtype=float))
            coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
            if keys.shape[0] != coeffs.shape[0]:
                raise ValueError("table keys and coeffs must have the same number of rows")
            object.__setattr__(self, "keys", keys)
            object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def identity(cls) -> "CoefficientFamily":
        return cls("identity", q_max=0)

    @classmethod
    def ma(cls, order: int) -> "CoefficientFamily":
        return cls("ma", q_max=int(order))

    @classmethod
    def arma11(cls, q_max: int = 64) -> "CoefficientFamily":
        return cls("arma11", q_max=int(q_max))

    @classmethod
    def table(cls, keys, coeffs) -> "CoefficientFamily":
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        return cls("table", q_max=coeffs.shape[1] - 1, keys=keys, coeffs=coeffs)

    @property
    def dim(self) -> Optional[int]:
        """Dimension ``m`` of the parameter vectors, ``None`` if unconstrained."""
        if self.kind == "ma":
            return self.q_max
        if self.kind == "arma11":
            return 2
        if self.kind == "table":
            return self.keys.shape[1]
        return None

    @property
    def finite_order(self) -> Optional[int]:
        """Exact MA order, or ``None`` for infinite-order families."""
        if self.kind == "arma11":
            return None
        return self.q_max

    def _check_dim(self, lam: np.ndarray) -> None:
        m = self.dim
        if m is not None and lam.shape[-1] != m:
            raise ValueError(
                f"parameter dimension {lam.shape[-1]} does not match family dimension {m}"
            )

    def coefficients(self, lam, q: Optional[int] = None) -> np.ndarray:
        """Return ``f_0(lam), ..., f_q(lam)``; ``q`` defaults to ``q_max``."""
        return self.coefficient_matrix(np.atleast_2d(np.asarray(lam, dtype=float)), q)[0]

    def coefficient_matrix(self, lams, q: Optional[int] = None) -> np.ndarray:
        """Coefficients for several parameter vectors, shape ``(len(lams), q + 1)``."""
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        self._check_dim(lams)
        q = self.q_max if q is None else int(q)
        if q < 0:
            raise ValueError("q must be nonnegative")
        out = np.zeros((lams.shape[0], q + 1))
        out[:, 0] = 1.0
        if q == 0:
            return out
        if self.kind == "ma":
            k = min(q, self.q_max)
            out[:, 1:k + 1] = lams[:, :k]
        elif self.kind == "arma11":
            phi, theta = lams[:, 0], lams[:, 1]
            if np.any(np.abs(phi) >= 1):
                raise ValueError("ARMA(1,1) requires |phi| < 1 for causality")
            lags = np.arange(q)
            out[:, 1:] = (theta + phi)[:, None] * phi[:, None] ** lags[None, :]
        elif self.kind == "table":
            rows = np.array([self._table_row(lam) for lam in lams])
            k = min(q, self.q_max)
            out[:, :k + 1] = self.coeffs[rows, :k + 1]
        return out

    def _table_row(self, lam: np.ndarray) -> int:
        hits = np.flatnonzero(np.all(np.isclose(self.keys, lam, rtol=0, atol=1e-12), axis=1))
        if hits.size == 0:
            raise ValueError(f"parameter {lam} is not a key of the coefficient table")
        return int(hits[0])

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "q_max": self.q_max}
        if self.kind == "table":
            d["keys"] = self.keys.tolist()
            d["coeffs"] = self.coeffs.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientFamily":
        kind = d["kind"]
        if kind == "identity":
            return cls.identity()
        if kind == "ma":
            return cls.ma(d.get("order", d.get("q_max")))
        if kind == "arma11":
            return cls.arma11(d.get("q_max", 64))
        if kind == "table":
            return cls.table(d["keys"], d["coeffs"])
        raise ValueError(f"unknown coefficient family {kind!r}")


@dataclass(frozen=True)
class SpectralParamDistribution:
    """Finite discrete distribution of parameter vectors.

    Normalization is not enforced here so that malformed inputs can still be
    diagnosed by :func:`validate_assumptions`; consumers call
    :meth:`require_normalized`.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise ValueError("atoms must be a nonempty list of equal-length vectors")
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError("one weight per atom required")
        if np.any(weights <= 0) or np.any(weights > 1):
            raise ValueError("weights must lie in (0, 1]")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point(cls, lam) -> "SpectralParamDistribution":
        return cls(np.atleast_2d(np.asarray(lam, dtype=float)), [1.0])

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return bool(abs(self.weights.sum() - 1.0) <= tol)

    def require_normalized(self) -> None:
        if not self.is_normalized():
            raise ValueError(f"atom weights sum to {self.weights.sum()!r}, not 1")

    def index_of(self, lam) -> int:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        hits = np.flatnonzero(np.all(np.isclose(self.atoms, lam, rtol=0, atol=1e-12), axis=1))
        if hits.size == 0:
            raise ValueError(f"{lam} is not an atom of the distribution")
        return int(hits[0])


def _conv_filter_response(b: np.ndarray, nu) -> np.ndarray:
    k = np.arange(b.size)
    return np.exp(1j * np.multiply.outer(np.asarray(nu, dtype=float), k)) @ b


@dataclass(frozen=True)
class ProcessModel:
    """Generative description of ``X_t = B^(1/2) sum_l A_l Z_(t-l)``, optionally filtered.

    ``scaling`` holds ``g_B`` per atom of ``fa`` and ``filter`` holds the
    real filter taps ``b_0, ..., b_K`` applied after the linear process.
    """

    family: CoefficientFamily
    fa: SpectralParamDistribution
    scaling: Optional[np.ndarray] = None
    filter: Optional[np.ndarray] = None
    innovation: str = "real_gaussian"
    rotation: str = "identity"

    def __post_init__(self):
        m = self.family.dim
        if m is not None and self.fa.dim != m:
            raise ValueError(f"atoms have dimension {self.fa.dim}, family expects {m}")
        # force evaluation so bad parameters (e.g. |phi| >= 1) fail at construction
        self.family.coefficient_matrix(self.fa.atoms, min(self.family.q_max, 1))
        if self.scaling is not None:
            g = np.asarray(self.scaling, dtype=float).ravel()
            if g.shape[0] != self.fa.n_atoms:
                raise ValueError("scaling needs one value per atom")
            if np.any(g < 0) or not np.any(g > 0):
                raise ValueError("scaling must be nonnegative and positive on at least one atom")
            object.__setattr__(self, "scaling", g)
        if self.filter is not None:
            b = np.asarray(self.filter, dtype=float).ravel()
            if b.size == 0 or not np.all(np.isfinite(b)):
                raise ValueError("filter taps must be a finite nonempty sequence")
            object.__setattr__(self, "filter", b)
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"innovation must be one of {INNOVATIONS}")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}")

    @property
    def is_complex(self) -> bool:
        return self.innovation == "complex_gaussian"

    @property
    def g(self) -> np.ndarray:
        """``g_B`` per atom (ones when no scaling is set)."""
        if self.scaling is None:
            return np.ones(self.fa.n_atoms)
        return self.scaling

    def zeta(self, nu) -> np.ndarray:
        """Filter power response ``|sum_k b_k e^(ik nu)|^2`` (ones without a filter)."""
        nu = np.asarray(nu, dtype=float)
        if self.filter is None:
            return np.ones(nu.shape)
        return np.abs(_conv_filter_response(self.filter, nu)) ** 2

    def h_matrix(self, nu, atoms: Optional[np.ndarray] = None) -> np.ndarray:
        """Effective power transfer ``zeta(nu) g_B(lam) h(lam, nu)``, shape ``(atoms, len(nu))``.

        ``atoms`` defaults to the atoms of ``fa``; a different set of atoms is
        only allowed without scaling (``g_B`` is tabulated on ``fa``).
        """
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        if atoms is None:
            atoms, g = self.fa.atoms, self.g
        else:
            atoms = np.atleast_2d(atoms)
            g = np.array([self.g[self.fa.index_of(a)] for a in atoms]) \
                if self.scaling is not None else np.ones(atoms.shape[0])
        coef = self.family.coefficient_matrix(atoms)
        phase = np.exp(1j * np.multiply.outer(np.arange(coef.shape[1]), nu))
        h = np.abs(coef @ phase) ** 2
        return h * g[:, None] * self.zeta(nu)[None, :]

    def lambda_bar(self) -> float:
        """Operator-norm bound ``sum_l sup_atoms |f_l|`` for the effective process.

        Scaling and filtering multiply the bound by ``sqrt(max g_B)`` and
        ``sum_k |b_k|`` respectively.
        """
        coef = self.family.coefficient_matrix(self.fa.atoms)
        bound = float(np.abs(coef).max(axis=0).sum())
        bound *= math.sqrt(float(self.g.max()))
        if self.filter is not None:
            bound *= float(np.abs(self.filter).sum())
        return bound

    def taps(self, q: int) -> np.ndarray:
        """Per-atom causal filter taps of the truncated process, shape ``(atoms, q + K + 1)``."""
        coef = self.family.coefficient_matrix(self.fa.atoms, q) * np.sqrt(self.g)[:, None]
        if self.filter is None:
            return coef
        return np.array([np.convolve(row, self.filter) for row in coef])

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "atoms": self.fa.atoms.tolist(),
            "weights": self.fa.weights.tolist(),
            "scaling": None if self.scaling is None else self.scaling.tolist(),
            "filter": None if self.filter is None else self.filter.tolist(),
            "innovation": self.innovation,
            "rotation": self.rotation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessModel":
        family = CoefficientFamily.from_dict(d["family"])
        atoms = d.get("atoms")
        if atoms is None:
            atoms = [[0.0] * (family.dim or 1)]
        weights = d.get("weights") or [1.0 / len(atoms)] * len(atoms)
        return cls(
            family=family,
            fa=SpectralParamDistribution(atoms, weights),
            scaling=d.get("scaling"),
            filter=d.get("filter"),
            innovation=d.get("innovation", "real_gaussian"),
            rotation=d.get("rotation", "identity"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProcessModel":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Short stable hash of the canonical JSON form."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def psi(family: CoefficientFamily, lam, nu):
    """Transfer function ``sum_l e^(i l nu) f_l(lam)`` (truncated at ``q_max``)."""
    coef = family.coefficients(lam)
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0) or np.any(nu_arr > 2 * np.pi):
        raise ValueError("nu must lie in [0, 2*pi]")
    phase = np.exp(1j * np.multiply.outer(nu_arr, np.arange(coef.size)))
    out = phase @ coef
    return complex(out) if np.ndim(out) == 0 else out


def power_transfer(family: CoefficientFamily, lam, nu):
    return np.abs(psi(family, lam, nu)) ** 2


def effective_h(model: ProcessModel, lam, nu):
    """``zeta(nu) * g_B(lam) * h(lam, nu)`` for a single parameter vector."""
    h = power_transfer(model.family, lam, nu)
    g = 1.0 if model.scaling is None else model.scaling[model.fa.index_of(lam)]
    return model.zeta(nu) * g * h


TAPER_KINDS = ("geometric", "polynomial", "custom")


@dataclass(frozen=True)
class TaperSpec:
    """Tapering weights ``T_n(tau)``, even in ``tau``, zero for ``|tau| >= horizon``.

    ``param`` is ``beta`` for geometric weights ``beta**|tau|``, ``alpha`` for
    polynomial weights ``(1 + |tau|)**(-alpha)``; custom weights give
    ``T(1), T(2), ...`` explicitly (``T(0) = 1`` always).
    """

    kind: str
    horizon: int
    param: float = 0.0
    table: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in TAPER_KINDS:
            raise ValueError(f"unknown taper kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.kind == "geometric" and not 0 < self.param < 1:
            raise ValueError("geometric taper needs beta in (0, 1)")
        if self.kind == "polynomial" and not self.param > 2:
            raise ValueError("polynomial taper needs alpha > 2")
        if self.kind == "custom":
            if self.table is None:
                raise ValueError("custom taper needs a weight table")
            object.__setattr__(self, "table", tuple(float(t) for t in self.table))

    @classmethod
    def identity(cls) -> "TaperSpec":
        """Taper keeping only lag 0 (symbol identically 1)."""
        return cls("custom", horizon=1, table=())

    def weights(self, max_lag: Optional[int] = None) -> np.ndarray:
        """``T_n(0), ..., T_n(L - 1)`` with ``L = min(horizon, max_lag)``."""
        L = self.horizon if max_lag is None else min(self.horizon, max_lag)
        tau = np.arange(L, dtype=float)
        if self.kind == "geometric":
            return self.param ** tau
        if self.kind == "polynomial":
            return (1.0 + tau) ** (-self.param)
        w = np.zeros(L)
        w[0] = 1.0
        k = min(L - 1, len(self.table))
        w[1:k + 1] = self.table[:k]
        return w

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "horizon": self.horizon, "param": self.param}
        if self.table is not None:
            d["table"] = list(self.table)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaperSpec":
        return cls(d["kind"], int(d["horizon"]), float(d.get("param", 0.0)), d.get("table"))


def taper_symbol(taper: TaperSpec, theta):
    """``1 + 2 sum_{tau=1}^{horizon-1} T_n(tau) cos(tau theta)``."""
    w = taper.weights()
    theta_arr = np.asarray(theta, dtype=float)
    tau = np.arange(1, w.size)
    out = 1.0 + 2.0 * (np.cos(np.multiply.outer(theta_arr, tau)) @ w[1:])
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class AssumptionReport:
    checks: dict
    abs_bound: float
    lag_bound: float
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": dict(self.checks),
            "abs_bound": self.abs_bound,
            "lag_bound": self.lag_bound,
            "notes": list(self.notes),
        }


def validate_assumptions(model: ProcessModel) -> AssumptionReport:
    """Check the modelling assumptions and report coefficient bounds.

    ``abs_bound`` is ``sum_l sup_atoms |f_l|`` and ``lag_bound`` is
    ``sum_l l * sup_atoms |f_l|``, both over the evaluated lags ``0..q_max``.
    """
    checks: dict[str, bool] = {}
    notes: list[str] = []
    fa = model.fa
    checks["weights_normalized"] = bool(fa.is_normalized())
    if not checks["weights_normalized"]:
        notes.append(f"weights sum to {fa.weights.sum():.15g}")
    checks["dimension"] = bool(model.family.dim is None or model.family.dim == fa.dim)

    try:
        coef = model.family.coefficient_matrix(fa.atoms)
    except ValueError as exc:
        checks["coefficients"] = False
        notes.append(str(exc))
        return AssumptionReport(checks, math.inf, math.inf, notes)

    sup = np.abs(coef).max(axis=0)
    abs_bound = float(sup.sum())
    lag_bound = float((np.arange(sup.size) * sup).sum())
    checks["f0_is_one"] = bool(np.allclose(coef[:, 0], 1.0, rtol=0, atol=1e-12))
    checks["summable"] = math.isfinite(abs_bound) and math.isfinite(lag_bound)
    if model.family.kind == "arma11":
        checks["causal"] = bool(np.all(np.abs(fa.atoms[:, 0]) < 1))

    if model.scaling is not None:
        g = model.scaling
        checks["scaling"] = bool(np.all(g >= 0) and np.any(g > 0))
    if model.filter is not None:
        b = model.filter
        checks["filter"] = math.isfinite(float((np.arange(b.size) * np.abs(b)).sum()))
    return AssumptionReport(checks, abs_bound, lag_bound, notes)
