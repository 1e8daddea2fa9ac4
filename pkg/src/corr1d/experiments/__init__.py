"""Declarative experiment runs: configs, presets, CSV/JSON outputs and comparison."""
from .config import EXPERIMENTS, RunConfig, load_config, parse_config
from .io import compare, read_csv, write_csv
from .runner import build_curves, execute

__all__ = ["EXPERIMENTS", "RunConfig", "load_config", "parse_config", "compare", "read_csv",
           "write_csv", "build_curves", "execute"]
