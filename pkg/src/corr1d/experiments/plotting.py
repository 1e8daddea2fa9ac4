"""PNG figures drawn from the written CSV tables.

Figures read only the results files, so they follow the same column contract
any external plotter would use.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv  # noqa: E402

THICKNESS_EXPERIMENTS = ("fig2", "fig3b")


def _by_curve(rows):
    groups = defaultdict(list)
    for r in rows:
        groups[r["curve"]].append(r)
    return groups


def _col(rows, name):
    return np.array([float(r[name]) for r in rows])


def plot_spectra(results: Path, target: Path, thickness: bool) -> None:
    _, rows = read_csv(results)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, (label, rs) in enumerate(_by_curve(rows).items()):
        d = _col(rs, "delta_over_gamma_t")
        color = f"C{i % 10}"
        if thickness:
            y, e, m = (_col(rs, c) for c in ("mean_lnT_scaled", "stderr_lnT_scaled",
                                             "mft_lnT_scaled"))
        else:
            y, e, m = (_col(rs, c) for c in ("mean_T", "stderr_T", "mft_T"))
        ax.plot(d, y, color=color, lw=1.2, label=label)
        ax.fill_between(d, y - e, y + e, color=color, alpha=0.25, lw=0)
        ax.plot(d, m, color=color, lw=0.8, ls="--")
    if thickness and rows:
        d = np.unique(_col(rows, "delta_over_gamma_t"))
        ax.plot(d, 1.0 / (1.0 + d ** 2), color="k", lw=0.8, ls=":", label="Lorentzian limit")
    ax.set_xlabel(r"$\delta/\gamma_t$")
    ax.set_ylabel(r"$-\langle\ln T\rangle/(2N\gamma_w/\gamma_t)$" if thickness
                  else r"$\langle T\rangle$")
    ax.legend(fontsize=6, frameon=False)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def plot_shifts(shifts: Path, target: Path) -> None:
    _, rows = read_csv(shifts)
    kls = {float(r["kL"]) for r in rows}
    xname = "kL" if len(kls) > 1 else "gamma_w_over_gamma_t"
    series = "gamma_w_over_gamma_t" if xname == "kL" else "kind"
    groups = defaultdict(list)
    for r in rows:
        groups[r[series]].append(r)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, (key, rs) in enumerate(sorted(groups.items(), key=lambda kv: str(kv[0]))):
        rs = sorted(rs, key=lambda r: float(r[xname]))
        x = _col(rs, xname)
        ax.errorbar(x, _col(rs, "shift_over_gamma_t"), yerr=_col(rs, "uncertainty"),
                    fmt="o", ms=3, color=f"C{i}", label=f"{series}={key}")
        ax.plot(x, _col(rs, "cls_prediction"), color=f"C{i}", lw=0.8)
    if xname == "gamma_w_over_gamma_t":
        ax.set_xscale("log")
    ax.set_xlabel(xname)
    ax.set_ylabel(r"shift $/\gamma_t$")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def plot_deviation(results: Path, target: Path) -> None:
    header, rows = read_csv(results)
    x = _col(rows, header[0])
    r = _col(rows, "relative_deviation")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(x, r, "o-", ms=3)
    if header[0] != "delta_over_gamma_t":
        ax.set_xscale("log")
    if np.all(r[np.isfinite(r)] > 0):
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    ax.set_ylabel("relative deviation from the independent-atom product")
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def render(experiment: str, out: Path) -> List[str]:
    """Draw every figure for ``experiment`` into ``out``; returns file names."""
    out = Path(out)
    written = []
    results = out / "results.csv"
    if experiment in ("figA1a", "figA1b", "two-atom"):
        plot_deviation(results, out / "deviation.png")
        return ["deviation.png"]
    plot_spectra(results, out / "spectrum.png", thickness=experiment in THICKNESS_EXPERIMENTS)
    written.append("spectrum.png")
    if (out / "shifts.csv").exists():
        plot_shifts(out / "shifts.csv", out / "shifts.png")
        written.append("shifts.png")
    return written
