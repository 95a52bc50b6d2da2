"""Experiment orchestration: simulate, compute ESDs, solve LSDs, compare.

Every run writes into one output directory holding a copy of the config,
the emitted CSV files, ``summary.json`` (deterministic given config and seed)
and ``timings.json`` (wall-clock data, kept apart so that ``summary.json``
is byte-reproducible).
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .autocov import sym_autocov, tapered_spectral
from .inversion import DEFAULT_HEIGHTS, SpectralCurve, default_x_grid, density_curve, write_curve_csv
from .model import ProcessModel, TaperSpec, validate_assumptions
from .simulate import simulate_path
from .solver import KernelEquation, SolverConfig
from .spectra import ESD, ks_distance, write_esd_csv

log = logging.getLogger(__name__)

MODES = ("simulate", "esd", "lsd", "compare", "taper", "validate")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: ProcessModel
    c: list
    p_list: list
    taus: list = field(default_factory=lambda: [0])
    replicates: int = 1
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    mode: str = "compare"
    q: Optional[int] = None
    x_points: int = 1024
    v_sequence: tuple = DEFAULT_HEIGHTS
    taper: Optional[dict] = None
    eta: float = 0.0
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.c or any(not ci > 0 for ci in self.c):
            raise ConfigError("c must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if any(t < 0 for t in self.taus):
            raise ConfigError("lags must be nonnegative")
        if any(p < 1 for p in self.p_list):
            raise ConfigError("dimensions must be positive")
        for c in self.c:
            for p in self.p_list:
                if self.sample_size(p, c) < max(self.taus, default=0) + 1:
                    raise ConfigError(f"n = round({p}/{c}) is too small for lags {self.taus}")
        if self.mode == "taper" and not self.taper:
            raise ConfigError("taper mode needs a 'taper' section")

    @staticmethod
    def sample_size(p: int, c: float) -> int:
        return max(1, int(round(p / c)))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            model = ProcessModel.from_dict(d["model"])
            c = d.get("c", 0.5)
            c = [float(x) for x in c] if isinstance(c, (list, tuple)) else [float(c)]
            inv = d.get("inversion", {})
            return cls(
                model=model,
                c=c,
                p_list=[int(p) for p in d.get("p_list", [d.get("p", 100)])],
                taus=[int(t) for t in d.get("taus", [0])],
                replicates=int(d.get("replicates", 1)),
                seed=int(d.get("seed", 0)),
                solver=SolverConfig.from_dict(d.get("solver")),
                mode=d.get("mode", "compare"),
                q=d.get("q"),
                x_points=int(inv.get("x_points", 1024)),
                v_sequence=tuple(inv.get("v_sequence", DEFAULT_HEIGHTS)),
                taper=d.get("taper"),
                eta=float(d.get("eta", 0.0)),
                raw=d,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = dict(self.raw)
        d.update({
            "model": self.model.to_dict(),
            "c": self.c if len(self.c) > 1 else self.c[0],
            "p_list": self.p_list,
            "taus": self.taus,
            "replicates": self.replicates,
            "seed": self.seed,
            "solver": self.solver.to_dict(),
            "mode": self.mode,
            "q": self.q,
            "inversion": {"x_points": self.x_points, "v_sequence": list(self.v_sequence)},
            "eta": self.eta,
        })
        if self.taper is not None:
            d["taper"] = self.taper
        return d

    def taper_spec(self, n: int) -> TaperSpec:
        spec = dict(self.taper)
        if spec.get("horizon") is None:
            spec["horizon"] = n
        return TaperSpec.from_dict(spec)


@dataclass
class RunReport:
    out_dir: Path
    summary: dict
    failures: list

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def _dump_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _c_dirs(config: ExperimentConfig, out: Path):
    """Yield ``(c, directory)``; several ratios get one subdirectory each."""
    for c in config.c:
        d = out if len(config.c) == 1 else out / f"c{c:g}"
        d.mkdir(parents=True, exist_ok=True)
        yield c, d


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def lsd_curve(model: ProcessModel, c: float, tau: int, config: ExperimentConfig) -> SpectralCurve:
    eq = KernelEquation.lag(model, c, tau, config.solver)
    x = default_x_grid(c, model.lambda_bar(), config.x_points)
    return density_curve(eq, x, config.v_sequence)


def taper_curve(model: ProcessModel, c: float, taper: TaperSpec, eta: float,
                config: ExperimentConfig) -> SpectralCurve:
    eq = KernelEquation.tapered(model, c, taper, eta, config.solver)
    x = default_x_grid(c, model.lambda_bar(), config.x_points, eq.weight_bound)
    return density_curve(eq, x, config.v_sequence)


def _replicate_esds(config: ExperimentConfig, p: int, n: int, r: int, taus) -> dict:
    path = simulate_path(config.model, p, n, config.q, config.seed, r)
    return {tau: ESD.of(sym_autocov(path, tau)) for tau in taus}


def _start(config: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "config.json", config.to_dict())
    return out


def _finish(out: Path, config: ExperimentConfig, cells: list, failures: list,
            timings: dict) -> RunReport:
    summary = {"mode": config.mode, "seed": config.seed, "cells": cells, "failures": failures}
    _dump_json(out / "summary.json", summary)
    _dump_json(out / "timings.json", timings)
    return RunReport(out, summary, failures)


def _ks_stats(values: list) -> dict:
    return {"ks": values, "ks_median": float(np.median(values)), "ks_max": float(np.max(values))}


def run_compare(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """ESDs of simulated ``C_tau`` against the inverted LSD for each ``(c, p, tau)``."""
    out = _start(config, out_dir)
    cells, failures, timings = [], [], {}
    for c, cdir in _c_dirs(config, out):
        curves, curve_err = {}, {}
        for tau in config.taus:
            t0 = time.perf_counter()
            try:
                curves[tau] = lsd_curve(config.model, c, tau, config)
            except Exception as exc:  # recorded per cell; other cells proceed
                curve_err[tau] = f"{type(exc).__name__}: {exc}"
            timings[f"c={c:g}/lsd_tau={tau}"] = time.perf_counter() - t0
        for p in config.p_list:
            n = config.sample_size(p, c)
            t0 = time.perf_counter()
            try:
                esds = _map(lambda r: _replicate_esds(config, p, n, r, config.taus),
                            range(config.replicates), threads)
            except Exception as exc:
                for tau in config.taus:
                    failures.append({"c": c, "p": p, "tau": tau, "error": f"{type(exc).__name__}: {exc}"})
                continue
            timings[f"c={c:g}/sim_p={p}"] = time.perf_counter() - t0
            for tau in config.taus:
                if tau in curve_err:
                    failures.append({"c": c, "p": p, "tau": tau, "error": curve_err[tau]})
                    continue
                curve = curves[tau]
                write_curve_csv(cdir / f"curve_tau{tau}_p{p}.csv", curve)
                ks = []
                for r, rep in enumerate(esds):
                    write_esd_csv(cdir / f"esd_tau{tau}_p{p}_r{r}.csv", rep[tau])
                    ks.append(ks_distance(rep[tau], curve))
                cells.append({"c": c, "p": p, "n": n, "tau": tau, **_ks_stats(ks),
                              "atom_at_zero": curve.atom_at_zero,
                              "curve_mass": curve.total_mass, "flags": list(curve.flags)})
                log.info("c=%g p=%d tau=%d median KS %.4f", c, p, tau, cells[-1]["ks_median"])
    return _finish(out, config, cells, failures, timings)


def run_lsd(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """Inverted LSD curves only, ``curve_tau<tau>.csv`` per ratio."""
    out = _start(config, out_dir)
    cells, failures, timings = [], [], {}
    for c, cdir in _c_dirs(config, out):
        def one(tau):
            t0 = time.perf_counter()
            try:
                return tau, lsd_curve(config.model, c, tau, config), None, time.perf_counter() - t0
            except Exception as exc:
                return tau, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0

        for tau, curve, err, dt in _map(one, config.taus, threads):
            timings[f"c={c:g}/lsd_tau={tau}"] = dt
            if err:
                failures.append({"c": c, "tau": tau, "error": err})
                continue
            write_curve_csv(cdir / f"curve_tau{tau}.csv", curve)
            cells.append({"c": c, "tau": tau, "atom_at_zero": curve.atom_at_zero,
                          "curve_mass": curve.total_mass, "flags": list(curve.flags)})
    return _finish(out, config, cells, failures, timings)


def run_esd(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """Simulated ESDs only."""
    out = _start(config, out_dir)
    cells, failures, timings = [], [], {}
    for c, cdir in _c_dirs(config, out):
        for p in config.p_list:
            n = config.sample_size(p, c)
            t0 = time.perf_counter()
            try:
                esds = _map(lambda r: _replicate_esds(config, p, n, r, config.taus),
                            range(config.replicates), threads)
            except Exception as exc:
                failures.append({"c": c, "p": p, "error": f"{type(exc).__name__}: {exc}"})
                continue
            timings[f"c={c:g}/sim_p={p}"] = time.perf_counter() - t0
            for tau in config.taus:
                for r, rep in enumerate(esds):
                    write_esd_csv(cdir / f"esd_tau{tau}_p{p}_r{r}.csv", rep[tau])
                ev = np.concatenate([rep[tau].eigenvalues for rep in esds])
                cells.append({"c": c, "p": p, "n": n, "tau": tau,
                              "min": float(ev.min()), "max": float(ev.max()),
                              "mean": float(ev.mean())})
    return _finish(out, config, cells, failures, timings)


def run_taper(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """Tapered estimator ESDs at ``eta`` against the tapered LSD.

    The taper horizon defaults to the sample size ``n`` of each cell.
    """
    out = _start(config, out_dir)
    cells, failures, timings = [], [], {}
    eta = config.eta
    for c, cdir in _c_dirs(config, out):
        for p in config.p_list:
            n = config.sample_size(p, c)
            taper = config.taper_spec(n)
            t0 = time.perf_counter()
            try:
                curve = taper_curve(config.model, c, taper, eta, config)

                def one(r):
                    path = simulate_path(config.model, p, n, config.q, config.seed, r)
                    return ESD.of(tapered_spectral(path, taper, eta))

                esds = _map(one, range(config.replicates), threads)
            except Exception as exc:
                failures.append({"c": c, "p": p, "eta": eta, "error": f"{type(exc).__name__}: {exc}"})
                continue
            timings[f"c={c:g}/taper_p={p}"] = time.perf_counter() - t0
            write_curve_csv(cdir / f"curve_taper_p{p}.csv", curve)
            ks = []
            for r, esd in enumerate(esds):
                write_esd_csv(cdir / f"esd_taper_p{p}_r{r}.csv", esd)
                ks.append(ks_distance(esd, curve))
            cells.append({"c": c, "p": p, "n": n, "eta": eta, "taper": taper.to_dict(),
                          **_ks_stats(ks), "atom_at_zero": curve.atom_at_zero,
                          "curve_mass": curve.total_mass, "flags": list(curve.flags)})
    return _finish(out, config, cells, failures, timings)


def run_simulate(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """Write ``path_p<p>_r<r>.bin`` containers for every replicate."""
    out = _start(config, out_dir)
    cells, failures, timings = [], [], {}
    for c, cdir in _c_dirs(config, out):
        for p in config.p_list:
            n = config.sample_size(p, c)

            def one(r):
                path = simulate_path(config.model, p, n, config.q, config.seed, r)
                path.save(cdir / f"path_p{p}_r{r}.bin")
                return path.q

            try:
                qs = _map(one, range(config.replicates), threads)
            except Exception as exc:
                failures.append({"c": c, "p": p, "error": f"{type(exc).__name__}: {exc}"})
                continue
            cells.append({"c": c, "p": p, "n": n, "q": qs[0], "replicates": config.replicates})
    return _finish(out, config, cells, failures, timings)


def run_validate(config: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    out = _start(config, out_dir)
    report = validate_assumptions(config.model)
    failures = [] if report.ok else [{"assumptions": report.to_dict()}]
    return _finish(out, config, [report.to_dict()], failures, {})


RUNNERS = {
    "simulate": run_simulate,
    "esd": run_esd,
    "lsd": run_lsd,
    "compare": run_compare,
    "taper": run_taper,
    "validate": run_validate,
}
