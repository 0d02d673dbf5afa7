"""Post-processing of ``levels.csv`` files: convergence slopes and
side-by-side comparison of two runs at matched problem sizes."""

import csv
import math
from dataclasses import dataclass

import numpy as np

CSV_HEADER = (
    "level",
    "dofs",
    "elements",
    "eig_index",
    "lambda",
    "err_vs_ref",
    "eta_total",
    "osc_total",
    "t_solve",
    "t_eig",
    "t_estimate",
    "t_mark",
    "t_refine",
)
TIME_COLUMNS = ("t_solve", "t_eig", "t_estimate", "t_mark", "t_refine")


class ReportError(ValueError):
    """Input data cannot support the requested analysis."""


def read_levels(path):
    """Rows of a levels CSV as dicts; empty cells become None."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ReportError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for raw in reader:
            row = {}
            for key in CSV_HEADER:
                v = raw[key]
                try:
                    if v in ("", None):
                        row[key] = None
                    elif key in ("level", "dofs", "elements", "eig_index"):
                        row[key] = int(v)
                    else:
                        row[key] = float(v)
                except ValueError:
                    raise ReportError(f"{path}: bad value {v!r} in column {key}") from None
            rows.append(row)
    return rows


@dataclass
class SlopeFit:
    quantity: str
    eig_index: int
    slope: float
    r2: float
    n_points: int


def fit_slope(dofs, values):
    """Least-squares slope of log(values) against log(dofs) and its R^2."""
    x = np.log(np.asarray(dofs, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), r2


def rate(path_or_rows, window=8, min_rows=4):
    """Slopes of err_vs_ref and eta_total against dofs over the last
    ``window`` levels, per eigenpair index."""
    rows = read_levels(path_or_rows) if isinstance(path_or_rows, (str, bytes)) or hasattr(path_or_rows, "__fspath__") else path_or_rows
    fits = []
    for idx in sorted({r["eig_index"] for r in rows}):
        series = sorted((r for r in rows if r["eig_index"] == idx), key=lambda r: r["level"])
        for qty in ("err_vs_ref", "eta_total"):
            pts = [(r["dofs"], r[qty]) for r in series if r[qty] is not None and r[qty] > 0.0]
            pts = pts[-window:]
            if len(pts) < min_rows:
                if qty == "err_vs_ref" and all(r[qty] is None for r in series):
                    continue
                raise ReportError(f"{qty} (eig {idx}): {len(pts)} usable rows, need {min_rows}")
            slope, r2 = fit_slope(*zip(*pts))
            fits.append(SlopeFit(qty, idx, slope, r2, len(pts)))
    if not fits:
        raise ReportError("no series with enough rows")
    return fits


@dataclass
class Match:
    eig_index: int
    dofs_a: int
    dofs_b: int
    err_a: float | None
    err_b: float | None
    err_ratio: float | None
    t_eig_ratio: float
    t_total_ratio: float


def _ratio(a, b):
    if a is None or b is None:
        return None
    if b == 0.0:
        return 1.0 if a == 0.0 else math.inf
    return a / b


def compare(a, b):
    """Pair every level of run ``a`` with the level of run ``b`` whose dofs
    are nearest (log scale) and within a factor 2; report a/b ratios."""
    rows_a = read_levels(a) if not isinstance(a, list) else a
    rows_b = read_levels(b) if not isinstance(b, list) else b
    matches = []
    for idx in sorted({r["eig_index"] for r in rows_a}):
        cand = [r for r in rows_b if r["eig_index"] == idx]
        if not cand:
            continue
        logs = np.log([r["dofs"] for r in cand])
        for ra in (r for r in rows_a if r["eig_index"] == idx):
            j = int(np.argmin(np.abs(logs - math.log(ra["dofs"]))))
            rb = cand[j]
            if max(ra["dofs"], rb["dofs"]) > 2 * min(ra["dofs"], rb["dofs"]):
                continue
            ta = sum(ra[c] or 0.0 for c in TIME_COLUMNS)
            tb = sum(rb[c] or 0.0 for c in TIME_COLUMNS)
            matches.append(
                Match(
                    eig_index=idx,
                    dofs_a=ra["dofs"],
                    dofs_b=rb["dofs"],
                    err_a=ra["err_vs_ref"],
                    err_b=rb["err_vs_ref"],
                    err_ratio=_ratio(ra["err_vs_ref"], rb["err_vs_ref"]),
                    t_eig_ratio=_ratio(ra["t_eig"] or 0.0, rb["t_eig"] or 0.0),
                    t_total_ratio=_ratio(ta, tb),
                )
            )
    if not matches:
        raise ReportError("the two runs have no dof counts within a factor 2 of each other")
    return matches


def format_rate(fits):
    lines = [f"{'quantity':<12} {'eig':>3} {'slope':>9} {'R^2':>8} {'n':>3}"]
    for f in fits:
        lines.append(f"{f.quantity:<12} {f.eig_index:>3d} {f.slope:>9.4f} {f.r2:>8.5f} {f.n_points:>3d}")
    return "\n".join(lines)


def format_compare(matches):
    def g(v):
        return "-" if v is None else f"{v:.3e}"

    lines = [f"{'eig':>3} {'dofs_a':>8} {'dofs_b':>8} {'err_a':>10} {'err_b':>10} {'err a/b':>10} {'t_eig a/b':>10} {'t a/b':>10}"]
    for m in matches:
        lines.append(
            f"{m.eig_index:>3d} {m.dofs_a:>8d} {m.dofs_b:>8d} {g(m.err_a):>10} {g(m.err_b):>10} "
            f"{g(m.err_ratio):>10} {g(m.t_eig_ratio):>10} {g(m.t_total_ratio):>10}"
        )
    return "\n".join(lines)
