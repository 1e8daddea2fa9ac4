"""CSV results files and the comparison harness."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from ..errors import GridMismatch

# columns that identify a row rather than carry a measurement
KEY_COLUMNS = ("curve",)


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Comma-separated, header row, LF line endings, full double precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row length does not match header")
            w.writerow([format_value(v) for v in row])


def read_csv(path) -> Tuple[List[str], List[Dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [dict(zip(header, (parse_value(s) for s in line))) for line in r if line]
    return header, rows


def _stderr_column(col: str, ha, hb):
    """Name of the standard-error column paired with ``col``, if both files have it."""
    names = [f"stderr_{col}"]
    if col.startswith("mean_"):
        base = col[5:]
        names.append(f"stderr_{base}")
        for part in ("_real", "_imag"):
            if base.endswith(part):
                names.append(f"stderr_{base[:-len(part)]}")
    return next((n for n in names if n in ha and n in hb), None)


def _row_key(row, key_cols):
    return tuple(row[c] for c in key_cols)


def compare(path_a, path_b) -> Dict:
    """Per-point differences of two results files.

    Rows are matched on the ``curve`` column (when present) plus the first
    numeric column, which holds the sweep coordinate. For every other shared
    numeric column the report lists the differences ``b - a``, their maximum
    magnitude, and when ``stderr_<column>`` exists in both files a chi-square
    against the combined standard errors (``stderr_T`` pairs with
    ``mean_T``, ``stderr_t`` with both parts of ``mean_t``).

    Raises
    ------
    GridMismatch
        If the files do not share the same curves and sweep coordinates.
    """
    ha, ra = read_csv(path_a)
    hb, rb = read_csv(path_b)
    if (ha[:1] == ["curve"]) != (hb[:1] == ["curve"]) or ha[:2] != hb[:2]:
        raise GridMismatch(f"files have different layouts: {ha[:2]} vs {hb[:2]}")
    keys = [c for c in KEY_COLUMNS if c in ha and c in hb]
    rest = [c for c in ha if c not in keys]
    if not rest:
        raise GridMismatch("no data columns")
    xcol = rest[0]
    if xcol not in hb:
        raise GridMismatch(f"sweep column {xcol!r} missing from {path_b}")
    key_cols = keys + [xcol]
    ka = [_row_key(r, key_cols) for r in ra]
    kb = [_row_key(r, key_cols) for r in rb]
    if ka != kb:
        only_a = sorted(set(ka) - set(kb), key=str)[:5]
        only_b = sorted(set(kb) - set(ka), key=str)[:5]
        raise GridMismatch(f"grids differ ({len(ka)} vs {len(kb)} rows); "
                           f"only in a: {only_a}, only in b: {only_b}")
    numeric = [c for c in rest[1:] if c in hb and not c.startswith("stderr_")
               and all(isinstance(r[c], (int, float)) for r in ra + rb)]
    columns = {}
    max_abs = 0.0
    for c in numeric:
        deltas = []
        chi2, dof = 0.0, 0
        se = _stderr_column(c, ha, hb)
        has_se = se is not None
        for a, b in zip(ra, rb):
            va, vb = float(a[c]), float(b[c])
            d = 0.0 if va == vb or (math.isnan(va) and math.isnan(vb)) else vb - va
            deltas.append(d if math.isfinite(d) else None)
            if math.isfinite(d):
                max_abs = max(max_abs, abs(d))
            if has_se:
                var = float(a[se]) ** 2 + float(b[se]) ** 2
                if var > 0 and math.isfinite(var) and math.isfinite(d):
                    chi2 += d * d / var
                    dof += 1
        col_max = max((abs(d) for d in deltas if d is not None), default=0.0)
        entry = {"deltas": deltas, "max_abs_delta": col_max,
                 "non_finite": sum(d is None for d in deltas)}
        if has_se:
            entry["chi2"] = chi2
            entry["dof"] = dof
        columns[c] = entry
    return {
        "a": str(path_a), "b": str(path_b),
        "key_columns": key_cols,
        "points": [list(k) for k in ka],
        "columns": columns,
        "max_abs_delta": max_abs,
        "identical": Path(path_a).read_bytes() == Path(path_b).read_bytes(),
    }
