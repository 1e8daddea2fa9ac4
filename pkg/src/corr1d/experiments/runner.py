"""Execution of run configs: curves, results tables, shifts and manifests."""
from __future__ import annotations

import itertools
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy

from .. import __version__
from ..core import WaveguideParams, single_atom_scatter
from ..ensembles import (EnsembleSpec, average_transmission, generate_configurations, mft_power,
                         resolve_threads)
from ..errors import Corr1dError, RunFailure
from ..meanfield import SlabMedium, cls_shift, extract_peak_shift, mft_width, mft_width_thin
from ..twoatom import (doppler_average_t, relative_deviation, two_atom_average_analytic,
                       two_atom_average_doppler)
from .config import RunConfig
from .io import write_csv

log = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ["curve", "delta_over_gamma_t", "mean_T", "stderr_T", "mean_lnT_scaled",
                    "mft_T", "n_used", "n_diverged", "stderr_lnT_scaled", "mean_t_real",
                    "mean_t_imag", "stderr_t", "mft_lnT_scaled"]
SHIFT_COLUMNS = ["curve", "kind", "gamma_w_over_gamma_t", "kL", "density_over_k", "n_atoms",
                 "shift_over_gamma_t", "uncertainty", "cls_prediction"]
TWO_ATOM_COLUMNS = ["exact_t_real", "exact_t_imag", "mft_t_real", "mft_t_imag",
                    "relative_deviation"]
SHIFT_EXPERIMENTS = ("fig3a", "fig3b", "custom-sweep")


@dataclass
class Curve:
    """One ensemble spectrum of a run."""

    label: str
    kind: str
    gamma_w_over_gamma_t: float
    box_length: float
    n_atoms: Optional[int]
    nbar: Optional[float]
    doppler_width: float
    n_realizations: int
    positions: Optional[tuple] = None

    @property
    def kL(self) -> float:
        return self.box_length

    @property
    def mean_atoms(self) -> float:
        return float(self.nbar if self.nbar is not None else self.n_atoms)

    @property
    def density_over_k(self) -> float:
        return self.mean_atoms / self.box_length

    def params(self) -> WaveguideParams:
        return WaveguideParams.from_ratio(self.gamma_w_over_gamma_t)

    def spec(self, seed: int) -> EnsembleSpec:
        return EnsembleSpec(kind=self.kind, box_length=self.box_length,
                            n_atoms=None if self.kind == "custom" else self.n_atoms,
                            nbar=self.nbar, doppler_width=self.doppler_width,
                            n_realizations=self.n_realizations, seed=seed,
                            positions=self.positions)

    def derived(self) -> Dict:
        d = asdict(self)
        d.update(kL=self.kL, density_over_k=self.density_over_k, mean_atoms=self.mean_atoms)
        return d


def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


def delta_grid(cfg: RunConfig) -> np.ndarray:
    deltas = cfg.get("grid", "deltas")
    if deltas is not None:
        g = np.asarray(deltas, dtype=float)
    else:
        g = np.linspace(cfg.get("grid", "delta_min"), cfg.get("grid", "delta_max"),
                        cfg.get("grid", "count"))
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise RunFailure("detuning grid must be strictly increasing")
    return g


def build_curves(cfg: RunConfig) -> List[Curve]:
    """Cartesian product of the swept ensemble and physics values, coupling innermost."""
    kinds = _as_list(cfg.get("ensemble", "kind", "classical-uniform"))
    gammas = _as_list(cfg.get("physics", "gamma_w_over_gamma_t", 1.0))
    kls = cfg.get("grid", "kl_values")
    densities = cfg.get("ensemble", "density_over_k")
    n_atoms = cfg.get("ensemble", "n_atoms")
    nbar = cfg.get("ensemble", "nbar")
    positions = cfg.get("ensemble", "positions")
    doppler = float(cfg.get("ensemble", "doppler_width_over_gamma_t", 0.0))
    R = int(cfg.get("ensemble", "n_realizations", 1 if "custom" in kinds else 4096))

    if kls is not None:
        lengths = [float(v) for v in kls]
    elif cfg.get("ensemble", "box_length") is not None:
        lengths = [float(cfg.get("ensemble", "box_length"))]
    else:
        lengths = [2.0 * math.pi * float(cfg.get("ensemble", "box_length_over_lambda", 2.0))]

    # the atom-number axis: explicit counts, densities, a Poisson mean, or fixed positions
    if positions is not None:
        numbers = [("positions", None)]
    elif nbar is not None:
        numbers = [("nbar", float(nbar))]
    elif n_atoms is not None:
        numbers = [("n", int(v)) for v in _as_list(n_atoms)]
    elif densities is not None:
        numbers = [("rho", float(v)) for v in _as_list(densities)]
    else:
        raise RunFailure("ensemble needs n_atoms, nbar, density_over_k or positions")

    curves = []
    for kind, L, (mode, val), g in itertools.product(kinds, lengths, numbers, gammas):
        n, nb, pos = None, None, None
        if kind == "custom":
            pos = tuple(float(v) for v in (positions or []))
            n = len(pos)
        elif mode == "n":
            n = val
        elif mode == "rho":
            n = int(round(val * L))
        elif mode == "nbar":
            nb = val
        else:
            raise RunFailure(f"positions require kind 'custom', got {kind!r}")
        count = f"N={n}" if nb is None else f"nbar={nb:g}"
        label = f"{kind}/gw={g:g}/{count}/kL={L:.6g}"
        curves.append(Curve(label, kind, float(g), L, n, nb, doppler, R, pos))
    return curves


def _check_failures(curve: Curve, spectrum, seed: int, limit: float):
    fails = spectrum.failures
    if not fails:
        return
    idx, s, msg = fails[0]
    log.warning("%s: %d realizations failed; first is realization %d (seed %d): %s",
                curve.label, len(fails), idx, s, msg)
    if len(fails) > limit * curve.n_realizations:
        raise RunFailure(
            f"{curve.label}: {len(fails)} of {curve.n_realizations} realizations failed; "
            f"first failure at realization {idx} (seed {s}): {msg}", seed=s, realization=idx)


def _spectrum_rows(curve: Curve, spectrum, mft_T) -> List[list]:
    g = curve.gamma_w_over_gamma_t
    scale = 2.0 * curve.mean_atoms * g
    rows = []
    for i, d in enumerate(spectrum.delta):
        with np.errstate(divide="ignore", invalid="ignore"):
            lnT_scaled = -spectrum.mean_lnT[i] / scale if scale else float("nan")
            se_scaled = spectrum.stderr_lnT[i] / scale if scale else float("nan")
            mft_scaled = -np.log(mft_T[i]) / scale if scale else float("nan")
        rows.append([curve.label, float(d), float(spectrum.mean_T[i]), float(spectrum.stderr_T[i]),
                     float(lnT_scaled), float(mft_T[i]), int(spectrum.n_used[i]),
                     int(spectrum.n_diverged[i]), float(se_scaled),
                     float(spectrum.mean_t[i].real), float(spectrum.mean_t[i].imag),
                     float(spectrum.stderr_t[i]), float(mft_scaled)])
    return rows


def _shift_row(curve: Curve, spectrum) -> list:
    p = curve.params()
    try:
        shift, err = extract_peak_shift(spectrum, observable="thickness")
    except (Corr1dError, ValueError) as exc:
        log.warning("%s: no shift extracted (%s)", curve.label, exc)
        shift, err = float("nan"), float("nan")
    pred = cls_shift(SlabMedium(curve.density_over_k, curve.box_length, p))
    return [curve.label, curve.kind, curve.gamma_w_over_gamma_t, curve.kL, curve.density_over_k,
            curve.n_atoms if curve.n_atoms is not None else -1, shift, err, pred]


def run_spectra(cfg: RunConfig, threads: int) -> Dict:
    grid = delta_grid(cfg)
    curves = build_curves(cfg)
    rows, shifts, derived = [], [], []
    # curves differing only in coupling share their configurations
    configs = {}
    for curve in curves:
        t0 = time.perf_counter()
        p = curve.params()
        spec = curve.spec(cfg.seed)
        if spec not in configs:
            configs.clear()
            configs[spec] = generate_configurations(spec)
        s = average_transmission(p, spec, grid, solver=cfg.solver, threads=threads,
                                 configs=configs[spec])
        _check_failures(curve, s, cfg.seed, cfg.max_failed_fraction)
        mft_T = np.atleast_1d(mft_power(p, grid, spec))
        rows.extend(_spectrum_rows(curve, s, mft_T))
        info = curve.derived()
        info["failed_realizations"] = len(s.failures)
        if cfg.experiment in SHIFT_EXPERIMENTS:
            shifts.append(_shift_row(curve, s))
            if curve.density_over_k > 0:
                slab = SlabMedium(curve.density_over_k, curve.box_length, p)
                # the thin-sample width takes the slab thickness L as its length scale
                info.update(mft_width=mft_width(slab), mft_width_thin=mft_width_thin(slab))
        info["wall_time_s"] = time.perf_counter() - t0
        derived.append(info)
        log.info("%s done in %.1f s", curve.label, info["wall_time_s"])
    tables = {"results.csv": (SPECTRUM_COLUMNS, rows)}
    if cfg.experiment in SHIFT_EXPERIMENTS:
        tables["shifts.csv"] = (SHIFT_COLUMNS, shifts)
    return {"tables": tables, "curves": derived, "grid": grid.tolist()}


def _complex_row(lead, exact, mft):
    try:
        r = relative_deviation(exact, mft)
    except Corr1dError:
        r = float("nan")
    return lead + [exact.real, exact.imag, mft.real, mft.imag, r]


def run_two_atom(cfg: RunConfig) -> Dict:
    p = WaveguideParams.from_ratio(float(cfg.get("physics", "gamma_w_over_gamma_t", 1.0)))
    rows = []
    if cfg.experiment == "figA1a":
        delta = float(cfg.get("grid", "detuning"))
        x12 = float(cfg.get("grid", "two_k_x12")) / (2 * p.k)
        for w in cfg.get("grid", "doppler_widths"):
            exact = two_atom_average_doppler(p, delta, float(w), x12)
            mft = doppler_average_t(p, delta, float(w)) ** 2
            rows.append(_complex_row([float(w)], exact, mft))
        header = ["doppler_width_over_gamma_t"] + TWO_ATOM_COLUMNS
    elif cfg.experiment == "figA1b":
        delta = float(cfg.get("grid", "detuning"))
        mft = complex(single_atom_scatter(p, delta).t) ** 2
        for rho in cfg.get("grid", "densities_over_k"):
            exact = two_atom_average_analytic(p, delta, float(rho) * p.k)
            rows.append(_complex_row([float(rho)], exact, mft))
        header = ["density_over_k"] + TWO_ATOM_COLUMNS
    else:
        rho = float(cfg.get("ensemble", "density_over_k"))
        for d in delta_grid(cfg):
            exact = two_atom_average_analytic(p, float(d), rho * p.k)
            mft = complex(single_atom_scatter(p, float(d)).t) ** 2
            rows.append(_complex_row([float(d)], exact, mft))
        header = ["delta_over_gamma_t"] + TWO_ATOM_COLUMNS
    return {"tables": {"results.csv": (header, rows)}, "curves": [], "grid": [r[0] for r in rows]}


def execute(cfg: RunConfig, threads: Optional[int] = None, output_dir=None,
            plots: bool = True) -> Path:
    """Run ``cfg`` and write its tables, manifest and figures; returns the output path."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    n_threads = resolve_threads(threads)
    t0 = time.perf_counter()
    if cfg.experiment in ("figA1a", "figA1b", "two-atom"):
        result = run_two_atom(cfg)
    else:
        result = run_spectra(cfg, n_threads)
    wall = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in result["tables"].items():
        write_csv(out / name, header, rows)
        written.append(name)
    if plots:
        from .plotting import render
        written.extend(render(cfg.experiment, out))
    manifest = {
        "experiment": cfg.experiment,
        "config_path": cfg.path,
        "config": cfg.raw,
        "parameters": cfg.provenance(),
        "seed": cfg.seed,
        "seeding": "realization i draws from numpy default_rng(SeedSequence(seed, spawn_key=(i,))); "
                   "fermionic chains share SeedSequence(seed, spawn_key=(2**32-1,)); "
                   "every curve reuses the same seed",
        "solver": cfg.solver,
        "detuning_grid": result["grid"],
        "curves": result["curves"],
        "units": "rates in gamma_t = gamma_w + gamma_l, lengths in 1/k",
        "threads": n_threads,
        "wall_time_s": wall,
        "version": {"corr1d": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                    "python": platform.python_version()},
        "outputs": written + ["manifest.json"],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, allow_nan=True, default=_json_default)
        fh.write("\n")
    return out


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
