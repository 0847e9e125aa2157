"""Command-line front end.

    rcsphere coverage --case known --p 3 --spec baseline --gamma-grid 0:0.05:70 --out cov.csv
    rcsphere sev --case unknown --p 3 --m 3 --spec standard --gamma-grid 0:1:65 --out sev.csv
    rcsphere optimize --case known-ab --p 3 --out-spec opt.ini --out-report opt.json
    rcsphere table --which 1 --rows 3,5 --out table1.csv
    rcsphere validate --matrix default --n 1000000 --seed 1 --out validation.json

CSV outputs get a sidecar ``<out>.manifest.json``; JSON reports embed their
manifest.  Exit codes: 2 bad instance file, 3 numerical failure,
4 infeasible optimization, 5 iteration cap reached.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .io import SpecFileError, fmt, load_instance, report_dict, save_instance, write_json
from .known import NumericalError, QuadratureConfig, RcsKnown, coverage, sev_curve
from .montecarlo import McConfig, mc_coverage_known, mc_coverage_unknown, mc_sev_known, mc_sev_unknown
from .optimize import (DEFAULT_GRID, Case, OptimizationProblem, SolverSettings, Status, audit_coverage,
                       optimize)
from .unknown import (ConvergenceError, OuterQuadConfig, RcsUnknown, coverage_unknown,
                      sev_unknown_curve)

log = logging.getLogger("rcsphere")

EXIT_SPEC = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4
EXIT_NON_CONVERGED = 5

TABLE1_ROWS = (3, 4, 5, 6, 7, 8, 9, 10)
TABLE1_LONG = (11, 12, 13, 20, 25)
TABLE2_ROWS = tuple((p, m) for m in (3, 10, 30) for p in (3, 5, 7, 9))
TABLE2_LONG = tuple((25, m) for m in (3, 10, 30))
# rough single-core minutes per row, for the --allow-long warning
ROW_MINUTES = {1: 5.0, 2: 60.0}

Z_LIMIT = 3.5


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _threads() -> int:
    try:
        n = int(os.environ.get("RCS_OPT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


class Manifest:
    def __init__(self, args: argparse.Namespace, argv: list[str]):
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in vars(args).items() if k != "func"}
        params["delta"] = QuadratureConfig().delta
        self.data = {"command": ["rcsphere", *argv], "parameters": params,
                     "version": __version__, "started": _now()}

    def finish(self, **extra) -> dict:
        return {**self.data, **extra, "finished": _now()}

    def write_sidecar(self, out: Path, **extra) -> None:
        write_json(out.with_name(out.name + ".manifest.json"), self.finish(**extra))


def parse_grid(text: str) -> np.ndarray:
    """``start:step:stop`` inclusive of stop, or a comma list."""
    try:
        if ":" in text:
            start, step, stop = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9))
            return start + step * np.arange(n + 1)
        return np.array(sorted(float(t) for t in text.split(",") if t.strip()))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:step:stop or a comma list")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def build_instance(args):
    unknown = args.case == "unknown"
    if unknown and args.m is None:
        raise SpecFileError("--m is required with --case unknown")
    if args.spec == "standard":
        if unknown:
            return RcsUnknown.standard(args.p, args.m, args.alpha)
        return RcsKnown.standard(args.p, args.alpha)
    if args.spec == "baseline":
        if unknown:
            return RcsUnknown.shrinkage_constant_radius(args.p, args.m, args.alpha)
        return RcsKnown.baseline(args.p, args.alpha)
    inst = load_instance(args.spec)
    if isinstance(inst, RcsUnknown) != unknown:
        raise SpecFileError(f"{args.spec} does not describe a {args.case}-variance set")
    return inst


def _outer(args) -> OuterQuadConfig:
    if args.outer_segments:
        return OuterQuadConfig(fixed_segments=args.outer_segments)
    return OuterQuadConfig()


def curve_values(inst, grid: np.ndarray, quantity: str, outer: OuterQuadConfig) -> np.ndarray:
    if quantity == "coverage":
        if isinstance(inst, RcsUnknown):
            return coverage_unknown(grid, inst, outer=outer)
        return coverage(grid, inst)
    if isinstance(inst, RcsUnknown):
        return sev_unknown_curve(grid, inst)
    return sev_curve(grid, inst)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _curve(args, manifest: Manifest, quantity: str) -> int:
    inst = build_instance(args)
    vals = curve_values(inst, args.gamma_grid, quantity, _outer(args))
    out = Path(args.out)
    write_csv(out, ["gamma", quantity], zip(args.gamma_grid.tolist(), np.asarray(vals, dtype=float).tolist()))
    manifest.write_sidecar(out)
    return 0


def cmd_coverage(args, manifest):
    return _curve(args, manifest, "coverage")


def cmd_sev(args, manifest):
    return _curve(args, manifest, "sev")


def _solver(args) -> SolverSettings:
    return SolverSettings(method=args.method, max_iters=args.max_iters, multistart_count=args.multistart,
                          seed=args.seed)


def _exit_for(status: Status) -> int:
    return {Status.INFEASIBLE: EXIT_INFEASIBLE, Status.NON_CONVERGED: EXIT_NON_CONVERGED}.get(status, 0)


def cmd_optimize(args, manifest):
    case = Case(args.case)
    if case.unknown and args.m is None:
        raise SpecFileError("--m is required for unknown-variance cases")
    grid = tuple(args.constraint_grid) if args.constraint_grid is not None else DEFAULT_GRID
    problem = OptimizationProblem(case, args.p, args.m if case.unknown else None, args.alpha, args.k,
                                  constraint_grid=grid, solver=_solver(args))
    report = optimize(problem, progress=log.info)
    if args.out_spec:
        save_instance(args.out_spec, report.instance)
    if args.out_report:
        doc = report_dict(report)
        doc["manifest"] = manifest.finish()
        write_json(args.out_report, doc)
    log.info("status %s, sev(0) = %.6f, audit min %.6f (%s)", report.status.value, report.sev_at_zero,
             report.audit.min_coverage, "PASS" if report.audit.passed else "FAIL")
    return _exit_for(report.status)


def _table1_row(p: int, alpha: float, solver: SolverSettings) -> dict:
    base = RcsKnown.baseline(p, alpha)
    base_audit = audit_coverage(base)
    report = optimize(OptimizationProblem(Case.KNOWN_AB, p, alpha=alpha, solver=solver))
    return {"p": p, "baseline_min_coverage": base_audit.min_coverage,
            "optimized_min_coverage": report.audit.min_coverage,
            "baseline_sev": float(sev_curve([0.0], base)[0]), "optimized_sev": report.sev_at_zero,
            "audit_passed": report.audit.passed, "status": report.status.value}


def _table2_row(p: int, m: int, alpha: float, solver: SolverSettings) -> dict:
    b_only = optimize(OptimizationProblem(Case.UNKNOWN_B_ONLY, p, m, alpha, solver=solver))
    full = optimize(OptimizationProblem(Case.UNKNOWN_AB, p, m, alpha, solver=solver))
    return {"p": p, "m": m,
            "sev_shrinkage_center": b_only.sev_at_zero, "min_coverage_shrinkage_center": b_only.audit.min_coverage,
            "sev_free_center": full.sev_at_zero, "min_coverage_free_center": full.audit.min_coverage,
            "audit_passed": b_only.audit.passed and full.audit.passed,
            "status": f"{b_only.status.value}/{full.status.value}"}


def parse_rows(which: int, text: str | None, allow_long: bool) -> list:
    default = TABLE1_ROWS if which == 1 else TABLE2_ROWS
    known = set(default) | set(TABLE1_LONG if which == 1 else TABLE2_LONG)
    if not text:
        rows = list(default) + (list(TABLE1_LONG if which == 1 else TABLE2_LONG) if allow_long else [])
    else:
        rows = []
        for tok in (t.strip() for t in text.split(",") if t.strip()):
            if which == 1:
                rows.append(int(tok))
            elif ":" in tok:
                p, m = tok.split(":")
                rows.append((int(p), int(m)))
            else:
                rows.extend(r for r in sorted(known) if r[0] == int(tok))
    bad = [r for r in rows if r not in known]
    if bad:
        raise SpecFileError(f"rows {bad} are not in table {which}")
    long_rows = [r for r in rows if r not in default]
    if long_rows and not allow_long:
        raise SpecFileError(f"rows {long_rows} are long-running; pass --allow-long")
    if long_rows:
        est = ROW_MINUTES[which] * 4 * len(long_rows)
        print(f"note: {len(long_rows)} long row(s), expect roughly {est:.0f} min or more", file=sys.stderr)
    return rows


def cmd_table(args, manifest):
    rows = parse_rows(args.which, args.rows, args.allow_long)
    solver = _solver(args)
    jobs = [(_table1_row, (r, args.alpha, solver)) if args.which == 1 else (_table2_row, (*r, args.alpha, solver))
            for r in rows]
    results = _run_jobs(jobs)
    header = list(results[0])
    out = Path(args.out)
    write_csv(out, header, ([res[h] for h in header] for res in results))
    manifest.write_sidecar(out)
    return 0


def _call(job):
    fn, fargs = job
    return fn(*fargs)


def _run_jobs(jobs: list) -> list:
    n = _threads()
    if n == 1 or len(jobs) == 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_call, jobs))


def validation_matrix(spec=None) -> list[tuple]:
    """(instance, variance, gamma) cells of the arbitration matrix."""
    if spec is not None:
        gammas = (0.0, 5.0) if isinstance(spec, RcsUnknown) else (0.0, 3.0, 10.0)
        return [(spec, g) for g in gammas]
    cells = [(RcsKnown.baseline(p), g) for p in (3, 5) for g in (0.0, 3.0, 10.0)]
    cells += [(RcsUnknown.shrinkage_constant_radius(3, 3), g) for g in (0.0, 5.0)]
    return cells


def _validate_cell(inst, gamma: float, mc: McConfig, outer: OuterQuadConfig) -> list[dict]:
    unknown = isinstance(inst, RcsUnknown)
    out = []
    for quantity in ("coverage", "sev"):
        analytic = float(curve_values(inst, np.array([gamma]), quantity, outer)[0])
        if unknown:
            est = (mc_coverage_unknown if quantity == "coverage" else mc_sev_unknown)(gamma, inst, mc)
        else:
            est = (mc_coverage_known if quantity == "coverage" else mc_sev_known)(gamma, inst, mc)
        z = est.z_score(analytic)
        out.append({"variance": "unknown" if unknown else "known", "quantity": quantity, "p": inst.p,
                    "m": inst.m if unknown else None, "gamma": gamma, "analytic": analytic,
                    "mc_mean": est.mean, "mc_se": est.standard_error, "z": z,
                    "passed": bool(abs(z) <= Z_LIMIT)})
    return out


def run_validation(n: int, seed: int, spec=None, outer: OuterQuadConfig | None = None) -> dict:
    mc = McConfig(n_draws=n, seed=seed)
    outer = outer or OuterQuadConfig()
    jobs = [(_validate_cell, (inst, g, mc, outer)) for inst, g in validation_matrix(spec)]
    cells = [c for res in _run_jobs(jobs) for c in res]
    return {"kind": "validation", "n_draws": n, "seed": seed, "z_limit": Z_LIMIT,
            "passed": all(c["passed"] for c in cells), "cells": cells}


def cmd_validate(args, manifest):
    spec = load_instance(args.spec) if args.spec else None
    doc = run_validation(args.n, args.seed, spec, _outer(args))
    doc["manifest"] = manifest.finish()
    write_json(args.out, doc)
    for c in doc["cells"]:
        log.info("%s %s p=%d gamma=%g analytic=%.6f mc=%.6f z=%+.2f", c["variance"], c["quantity"], c["p"],
                 c["gamma"], c["analytic"], c["mc_mean"], c["z"])
    return 0 if doc["passed"] else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _add_solver(sp):
    sp.add_argument("--method", choices=("slsqp", "cobyla"), default=SolverSettings.method)
    sp.add_argument("--max-iters", type=_positive_int, default=SolverSettings.max_iters)
    sp.add_argument("--multistart", type=_positive_int, default=SolverSettings.multistart_count)
    sp.add_argument("--seed", type=int, default=SolverSettings.seed)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcsphere", description="Recentered confidence spheres.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn in (("coverage", cmd_coverage), ("sev", cmd_sev)):
        sp = sub.add_parser(name, help=f"{name} as a function of gamma")
        sp.add_argument("--case", choices=("known", "unknown"), default="known")
        sp.add_argument("--p", type=int, required=True)
        sp.add_argument("--m", type=int)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--spec", default="baseline", help="baseline, standard or an instance file")
        sp.add_argument("--gamma-grid", type=parse_grid, default=parse_grid("0:1:65"))
        sp.add_argument("--outer-segments", type=_positive_int,
                        help="fixed outer Simpson segments (unknown variance); default is progressive")
        sp.add_argument("--out", required=True)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("optimize", help="minimise the volume at the origin")
    sp.add_argument("--case", choices=[c.value for c in Case], required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--m", type=int)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--k", type=float, default=10.0)
    sp.add_argument("--constraint-grid", type=parse_grid)
    sp.add_argument("--out-spec")
    sp.add_argument("--out-report")
    _add_solver(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("table", help="reproduce rows of the comparison tables")
    sp.add_argument("--which", type=int, choices=(1, 2), required=True)
    sp.add_argument("--rows", help="table 1: p list; table 2: p or p:m list")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--allow-long", action="store_true")
    sp.add_argument("--out", required=True)
    _add_solver(sp)
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("validate", help="Monte Carlo arbitration of the analytic values")
    sp.add_argument("--matrix", choices=("default",), default="default")
    sp.add_argument("--spec", help="validate this instance file instead of the default matrix")
    sp.add_argument("--n", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=McConfig.seed)
    sp.add_argument("--outer-segments", type=_positive_int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    manifest = Manifest(args, argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args, manifest)
    except SpecFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (NumericalError, ConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("done in %.1f s", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
