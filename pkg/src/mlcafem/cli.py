"""Command-line driver.

    mlcafem run --problem example2 --algorithm mlc --out results/
    mlcafem rate results/levels.csv
    mlcafem compare mlc/levels.csv direct/levels.csv

Exit status: 0 success, 1 numerical failure, 2 usage error.
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .algorithm import AdaptiveConfig, afem_bvp_solve, direct_afem_solve, multilevel_correction_solve, uniform_solve
from .exceptions import ConfigurationError, GeometryError, HierarchyError, NonConvergenceError, ReductionError
from .mesh import read_mesh
from .problems import PROBLEMS, get_problem
from .report import CSV_HEADER, ReportError, compare, format_compare, format_rate, rate
from .vtk import write_vtk

log = logging.getLogger("mlcafem")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

ALGORITHMS = {
    "mlc": multilevel_correction_solve,
    "direct": direct_afem_solve,
    "uniform": uniform_solve,
}


@dataclass
class RunSpec:
    problem: str
    algorithm: str = "mlc"
    theta: float = 0.4
    q: int = 1
    max_dofs: int = 200_000
    max_iterations: int = 20
    seed: int = 0
    out: str = "."
    export_vtk: bool = False
    mesh_file: str | None = None
    coarse_cells: int | None = None
    zero_timings: bool = False

    def config(self):
        return AdaptiveConfig(
            theta=self.theta,
            max_iterations=self.max_iterations,
            max_dofs=self.max_dofs,
            num_eigenpairs=self.q,
            coarse_cells=self.coarse_cells,
        )


def _unit_source(x, y):
    return np.ones(np.shape(x))


def _fmt(v):
    return "" if v is None else repr(float(v))


def levels_rows(records, zero_timings=False):
    """CSV rows (lists of strings), one per level and eigenpair index."""
    rows = []
    for r in records:
        t = {k: (0.0 if zero_timings else r.timings.get(k, 0.0)) for k in ("solve", "eig", "estimate", "mark", "refine")}
        count = max(len(r.eigenvalues), len(r.eta_total))
        for i in range(count):
            lam = r.eigenvalues[i] if i < len(r.eigenvalues) else None
            rows.append(
                [
                    str(r.level),
                    str(r.dofs),
                    str(r.n_elements),
                    str(i),
                    _fmt(lam),
                    _fmt(r.errors[i] if i < len(r.errors) else None),
                    _fmt(r.eta_total[i]),
                    _fmt(r.osc_total[i]),
                ]
                + [_fmt(t[k]) for k in ("solve", "eig", "estimate", "mark", "refine")]
            )
    return rows


def write_levels_csv(path, records, zero_timings=False):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for row in levels_rows(records, zero_timings):
            fh.write(",".join(row) + "\n")


def export_levels_vtk(out, records):
    for r in records:
        point = {f"u_{i}": u for i, u in enumerate(r.vectors)}
        cell = {f"eta_sq_{i}": f.eta_sq for i, f in enumerate(r.indicators)}
        write_vtk(os.path.join(out, f"level_{r.level:03d}.vtk"), r.mesh, point, cell, title=f"level {r.level}")


def run(spec):
    """Execute one experiment; returns the level records."""
    if spec.algorithm not in (*ALGORITHMS, "bvp"):
        raise ConfigurationError(f"unknown algorithm {spec.algorithm!r}")
    problem = get_problem(spec.problem)
    config = spec.config()
    np.random.seed(spec.seed)
    mesh = read_mesh(spec.mesh_file, domain=problem.domain) if spec.mesh_file else None
    if spec.algorithm == "bvp":
        records = afem_bvp_solve(problem, _unit_source, config, mesh=mesh)
    else:
        records = ALGORITHMS[spec.algorithm](problem, config, mesh=mesh)
    os.makedirs(spec.out, exist_ok=True)
    write_levels_csv(os.path.join(spec.out, "levels.csv"), records, spec.zero_timings)
    if spec.export_vtk:
        export_levels_vtk(spec.out, records)
    return records


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="mlcafem", description="Adaptive P1 eigenvalue solvers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an adaptive experiment and write levels.csv")
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("--algorithm", default="mlc", choices=["mlc", "direct", "bvp", "uniform"])
    p.add_argument("--theta", type=float, default=0.4)
    p.add_argument("--q", type=_positive_int, default=1, help="number of eigenpairs")
    p.add_argument("--max-dofs", type=_positive_int, default=200_000)
    p.add_argument("--max-iterations", type=int, default=20)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--export-vtk", action="store_true", help="write level_NNN.vtk snapshots")
    p.add_argument("--mesh-file", help="initial mesh in the text mesh format")
    p.add_argument("--coarse-cells", type=_positive_int, help="cells per unit side of the structured coarse mesh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-timings", action="store_true", help="write 0 in the timing columns (bitwise-reproducible CSV)")

    r = sub.add_parser("rate", help="fit log-log convergence slopes")
    r.add_argument("csv")
    r.add_argument("--window", type=_positive_int, default=8)

    c = sub.add_parser("compare", help="compare two runs at matched dof counts")
    c.add_argument("csv_a")
    c.add_argument("csv_b")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            spec = RunSpec(
                problem=args.problem,
                algorithm=args.algorithm,
                theta=args.theta,
                q=args.q,
                max_dofs=args.max_dofs,
                max_iterations=args.max_iterations,
                seed=args.seed,
                out=args.out,
                export_vtk=args.export_vtk,
                mesh_file=args.mesh_file,
                coarse_cells=args.coarse_cells,
                zero_timings=args.zero_timings,
            )
            t0 = time.perf_counter()
            records = run(spec)
            last = records[-1]
            lam = ", ".join(f"{v:.10f}" for v in last.eigenvalues) or "-"
            print(f"{len(records)} levels, final dofs {last.dofs}, lambda {lam}, {time.perf_counter() - t0:.1f} s")
        elif args.command == "rate":
            print(format_rate(rate(args.csv, window=args.window)))
        else:
            print(format_compare(compare(args.csv_a, args.csv_b)))
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergenceError, ReductionError, GeometryError, HierarchyError, ReportError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
