"""Strict TOML run configurations and figure presets.

A config names an ``experiment`` and overrides preset values section by
section. Every value carries a provenance tag that ends up in the manifest:
``config`` (set by the user), ``preset`` (fixed figure parameter) or
``defaulted`` (a preset choice for a parameter the figure leaves open).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..ensembles import KINDS, SOLVERS
from ..errors import ConfigError

EXPERIMENTS = ("fig1", "fig2", "fig3a", "fig3b", "figA1a", "figA1b", "spectrum", "two-atom",
               "custom-sweep")

TOP_KEYS = {"experiment", "seed", "output_dir", "solver", "max_failed_fraction"}

# section -> key -> (types, list allowed)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "physics": {
        "gamma_w_over_gamma_t": ((int, float), True),
    },
    "ensemble": {
        "kind": ((str,), True),
        "n_atoms": ((int,), True),
        "nbar": ((int, float), False),
        "density_over_k": ((int, float), True),
        "box_length_over_lambda": ((int, float), False),
        "box_length": ((int, float), False),
        "doppler_width_over_gamma_t": ((int, float), False),
        "n_realizations": ((int,), False),
        "positions": ((int, float), True),
    },
    "grid": {
        "delta_min": ((int, float), False),
        "delta_max": ((int, float), False),
        "count": ((int,), False),
        "deltas": ((int, float), True),
        "kl_values": ((int, float), True),
        "doppler_widths": ((int, float), True),
        "densities_over_k": ((int, float), True),
        "detuning": ((int, float), False),
        "two_k_x12": ((int, float), False),
    },
}

# keys whose value may be a list of curves (the cartesian product is run)
SWEEPABLE = {("physics", "gamma_w_over_gamma_t"), ("ensemble", "kind"),
             ("ensemble", "n_atoms"), ("ensemble", "density_over_k"), ("grid", "kl_values")}
# keys that are always lists
LIST_ONLY = {("ensemble", "positions"), ("grid", "deltas"), ("grid", "kl_values"),
             ("grid", "doppler_widths"), ("grid", "densities_over_k")}

FIG2_LADDER = [0.4, 0.2, 0.1, 0.05, 0.025]
REALIZATIONS = 4096


def _geomspace(lo, hi, n):
    return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]


# (section, key) -> (value, source)
PRESETS: Dict[str, Dict[tuple, tuple]] = {
    "fig1": {
        ("ensemble", "kind"): (["classical-uniform", "fermionic"], "preset"),
        ("ensemble", "density_over_k"): ([2.0, 8.0], "preset"),
        ("ensemble", "box_length_over_lambda"): (2.0, "defaulted"),
        ("physics", "gamma_w_over_gamma_t"): (1.0, "defaulted"),
        ("ensemble", "n_realizations"): (REALIZATIONS, "defaulted"),
        ("grid", "delta_min"): (-10.0, "defaulted"),
        ("grid", "delta_max"): (45.0, "defaulted"),
        ("grid", "count"): (221, "defaulted"),
    },
    "fig2": {
        ("ensemble", "kind"): (["classical-uniform", "fermionic"], "preset"),
        ("physics", "gamma_w_over_gamma_t"): (FIG2_LADDER, "preset"),
        ("ensemble", "n_atoms"): (32, "preset"),
        ("ensemble", "box_length_over_lambda"): (2.0, "preset"),
        ("ensemble", "n_realizations"): (REALIZATIONS, "defaulted"),
        ("grid", "delta_min"): (-3.0, "defaulted"),
        ("grid", "delta_max"): (3.0, "defaulted"),
        ("grid", "count"): (61, "defaulted"),
    },
    "fig3a": {
        ("ensemble", "kind"): ("classical-uniform", "defaulted"),
        ("ensemble", "density_over_k"): (32.0 / math.pi, "preset"),
        ("physics", "gamma_w_over_gamma_t"): ([0.01, 0.02, 0.1], "preset"),
        ("grid", "kl_values"): ([m * math.pi / 4 for m in range(1, 9)], "defaulted"),
        ("ensemble", "n_realizations"): (REALIZATIONS, "defaulted"),
        ("grid", "delta_min"): (-1.5, "defaulted"),
        ("grid", "delta_max"): (2.5, "defaulted"),
        ("grid", "count"): (41, "defaulted"),
    },
    "fig3b": {
        ("ensemble", "kind"): (["classical-uniform", "fermionic"], "preset"),
        ("physics", "gamma_w_over_gamma_t"): (FIG2_LADDER, "preset"),
        ("ensemble", "n_atoms"): (32, "preset"),
        ("ensemble", "box_length_over_lambda"): (2.0, "preset"),
        ("ensemble", "n_realizations"): (REALIZATIONS, "defaulted"),
        ("grid", "delta_min"): (-3.0, "defaulted"),
        ("grid", "delta_max"): (3.0, "defaulted"),
        ("grid", "count"): (61, "defaulted"),
    },
    "figA1a": {
        ("physics", "gamma_w_over_gamma_t"): (1.0, "preset"),
        ("grid", "detuning"): (0.0, "preset"),
        ("grid", "two_k_x12"): (0.0, "preset"),
        ("grid", "doppler_widths"): (_geomspace(0.01, 100.0, 41), "defaulted"),
    },
    "figA1b": {
        ("physics", "gamma_w_over_gamma_t"): (1.0, "preset"),
        ("grid", "detuning"): (0.1, "preset"),
        ("grid", "densities_over_k"): (_geomspace(0.01, 10.0, 31), "defaulted"),
    },
    "spectrum": {
        ("ensemble", "kind"): ("classical-uniform", "defaulted"),
        ("ensemble", "n_atoms"): (32, "defaulted"),
        ("ensemble", "box_length_over_lambda"): (2.0, "defaulted"),
        ("physics", "gamma_w_over_gamma_t"): (1.0, "defaulted"),
        ("ensemble", "n_realizations"): (REALIZATIONS, "defaulted"),
        ("grid", "delta_min"): (-5.0, "defaulted"),
        ("grid", "delta_max"): (5.0, "defaulted"),
        ("grid", "count"): (101, "defaulted"),
    },
    "two-atom": {
        ("physics", "gamma_w_over_gamma_t"): (1.0, "defaulted"),
        ("ensemble", "density_over_k"): (0.5, "defaulted"),
        ("grid", "delta_min"): (-5.0, "defaulted"),
        ("grid", "delta_max"): (5.0, "defaulted"),
        ("grid", "count"): (101, "defaulted"),
    },
}
PRESETS["custom-sweep"] = dict(PRESETS["spectrum"])

TOP_DEFAULTS = {"seed": 0, "output_dir": "results", "solver": "transfer",
                "max_failed_fraction": 0.05}


@dataclass
class RunConfig:
    """Validated run description with per-value provenance."""

    experiment: str
    seed: int = 0
    output_dir: str = "results"
    solver: str = "transfer"
    max_failed_fraction: float = 0.05
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)
    path: Optional[str] = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value, source: str):
        self.sections.setdefault(section, {})[key] = value
        self.sources[f"{section}.{key}"] = source

    def provenance(self) -> Dict[str, Any]:
        out = {}
        for name in sorted(self.sources):
            sec, key = name.split(".", 1)
            out[name] = {"value": self.sections[sec][key], "source": self.sources[name],
                         "defaulted": self.sources[name] == "defaulted"}
        for key in sorted(TOP_DEFAULTS):
            src = "config" if key in self.raw else "defaulted"
            out[key] = {"value": getattr(self, key), "source": src,
                        "defaulted": src == "defaulted"}
        return out


def _line_of(text: str, section: Optional[str], key: str) -> Optional[int]:
    """1-based line of ``key = ...`` inside ``[section]`` (top level if None)."""
    current = None
    pat = re.compile(rf"^\s*(\"?){re.escape(key)}\1\s*=")
    head = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")
    for n, line in enumerate(text.splitlines(), 1):
        m = head.match(line)
        if m:
            current = m.group(1).strip('"')
            if section is not None and current == section and key == section:
                return n
            continue
        if current == section and pat.match(line):
            return n
    return None


def _check_value(section, key, value, text):
    types, allow_list = SCHEMA[section][key]
    line = _line_of(text, section, key)
    name = f"{section}.{key}"

    def ok(v):
        return isinstance(v, types) and not isinstance(v, bool)

    if isinstance(value, list):
        if not (allow_list or (section, key) in LIST_ONLY):
            raise ConfigError("expected a scalar, got a list", key=name, line=line)
        if not value and (section, key) != ("ensemble", "positions"):
            raise ConfigError("list must not be empty", key=name, line=line)
        if not all(ok(v) for v in value):
            raise ConfigError(f"list entries must be {'/'.join(t.__name__ for t in types)}",
                              key=name, line=line)
    else:
        if (section, key) in LIST_ONLY:
            raise ConfigError("expected a list", key=name, line=line)
        if not ok(value):
            raise ConfigError(f"expected {'/'.join(t.__name__ for t in types)}, got "
                              f"{type(value).__name__}", key=name, line=line)


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _validate_domains(cfg: RunConfig, text: str):
    def fail(section, key, msg):
        raise ConfigError(msg, key=f"{section}.{key}" if section else key,
                          line=_line_of(text, section, key))

    if cfg.solver not in SOLVERS:
        fail(None, "solver", f"unknown solver {cfg.solver!r}; expected one of {SOLVERS}")
    if not 0.0 <= cfg.max_failed_fraction <= 1.0:
        fail(None, "max_failed_fraction", "must lie in [0, 1]")
    if not 0 <= cfg.seed < 2 ** 64:
        fail(None, "seed", "seed must be a non-negative 64-bit integer")
    for g in _as_list(cfg.get("physics", "gamma_w_over_gamma_t", 1.0)):
        if not 0.0 < g <= 1.0:
            fail("physics", "gamma_w_over_gamma_t", "coupling ratio must lie in (0, 1]")
    for kind in _as_list(cfg.get("ensemble", "kind", "classical-uniform")):
        if kind not in KINDS:
            fail("ensemble", "kind", f"unknown kind {kind!r}; expected one of {KINDS}")
    positive = [("ensemble", "density_over_k"), ("ensemble", "box_length_over_lambda"),
                ("ensemble", "box_length"), ("ensemble", "n_realizations"), ("grid", "count"),
                ("grid", "kl_values"), ("grid", "densities_over_k")]
    for sec, key in positive:
        v = cfg.get(sec, key)
        if v is not None and any(x <= 0 for x in _as_list(v)):
            fail(sec, key, "must be positive")
    nonneg = [("ensemble", "n_atoms"), ("ensemble", "nbar"),
              ("ensemble", "doppler_width_over_gamma_t"), ("grid", "doppler_widths")]
    for sec, key in nonneg:
        v = cfg.get(sec, key)
        if v is not None and any(x < 0 for x in _as_list(v)):
            fail(sec, key, "must be non-negative")
    count = cfg.get("grid", "count")
    if count is not None and count < 2 and cfg.get("grid", "deltas") is None:
        fail("grid", "count", "need at least 2 grid points")
    lo, hi = cfg.get("grid", "delta_min"), cfg.get("grid", "delta_max")
    if lo is not None and hi is not None and not lo < hi:
        fail("grid", "delta_max", "delta_max must exceed delta_min")
    ens = cfg.sections.get("ensemble", {})
    if cfg.experiment != "custom-sweep":
        for sec, key in SWEEPABLE:
            if isinstance(cfg.get(sec, key), list) and cfg.sources.get(f"{sec}.{key}") == "config" \
                    and cfg.experiment in ("spectrum", "two-atom"):
                fail(sec, key, f"experiment {cfg.experiment!r} takes a single value")
    if "nbar" in ens and cfg.sources.get("ensemble.nbar") == "config":
        if "fermionic" in _as_list(ens.get("kind", "classical-uniform")):
            fail("ensemble", "nbar", "a fermionic ensemble needs a fixed atom number")
        if cfg.sources.get("ensemble.n_atoms") == "config":
            fail("ensemble", "nbar", "give either n_atoms or nbar, not both")
    if "positions" in ens and "custom" not in _as_list(ens.get("kind", "")):
        fail("ensemble", "positions", "positions are only used with kind = \"custom\"")
    if "custom" in _as_list(ens.get("kind", "")) and "positions" not in ens:
        fail("ensemble", "kind", "kind \"custom\" needs ensemble.positions")
    if "positions" in ens:
        pos = ens["positions"]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            fail("ensemble", "positions", "positions must be strictly increasing")


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    """Parse and validate config text; raises :class:`ConfigError` with location."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from None
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in SCHEMA:
                raise ConfigError(f"unknown section [{key}]", key=key, line=_line_of(text, key, key)
                                  or _line_of(text, None, key))
            for sub in value:
                if sub not in SCHEMA[key]:
                    raise ConfigError(f"unknown key in [{key}]", key=f"{key}.{sub}",
                                      line=_line_of(text, key, sub))
                _check_value(key, sub, value[sub], text)
        elif key not in TOP_KEYS:
            raise ConfigError("unknown top-level key", key=key, line=_line_of(text, None, key))
    if "experiment" not in raw:
        raise ConfigError("missing required key", key="experiment")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}",
                          key="experiment", line=_line_of(text, None, "experiment"))
    top = dict(TOP_DEFAULTS)
    for key in TOP_DEFAULTS:
        if key in raw:
            want = {"seed": int, "output_dir": str, "solver": str,
                    "max_failed_fraction": (int, float)}[key]
            if not isinstance(raw[key], want) or isinstance(raw[key], bool):
                raise ConfigError("wrong type", key=key, line=_line_of(text, None, key))
            top[key] = raw[key]
    cfg = RunConfig(experiment=exp, seed=int(top["seed"]), output_dir=str(top["output_dir"]),
                    solver=str(top["solver"]), max_failed_fraction=float(top["max_failed_fraction"]),
                    raw=raw, path=path)
    for (sec, key), (value, source) in PRESETS[exp].items():
        cfg.set(sec, key, value, source)
    for sec in SCHEMA:
        for key, value in raw.get(sec, {}).items():
            cfg.set(sec, key, value, "config")
    _resolve_conflicts(cfg)
    _validate_domains(cfg, text)
    return cfg


def _resolve_conflicts(cfg: RunConfig):
    """Drop preset values superseded by user keys that determine the same quantity."""
    ens = cfg.sections.setdefault("ensemble", {})
    user = {k.split(".", 1)[1] for k, s in cfg.sources.items() if s == "config" and k.startswith("ensemble.")}

    def drop(key):
        if key in ens and cfg.sources.get(f"ensemble.{key}") != "config":
            del ens[key]
            del cfg.sources[f"ensemble.{key}"]

    if "box_length" in user:
        drop("box_length_over_lambda")
    if user & {"n_atoms", "nbar"}:
        drop("density_over_k")
    if "nbar" in user:
        drop("n_atoms")
    if "density_over_k" in user:
        drop("n_atoms")
    if "positions" in user:
        for key in ("n_atoms", "density_over_k", "nbar"):
            drop(key)
    grid = cfg.sections.setdefault("grid", {})
    if "grid.deltas" in cfg.sources and cfg.sources["grid.deltas"] == "config":
        for key in ("delta_min", "delta_max", "count"):
            if key in grid and cfg.sources.get(f"grid.{key}") != "config":
                del grid[key]
                del cfg.sources[f"grid.{key}"]


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, str(p))
