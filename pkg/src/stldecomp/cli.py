"""Command line entry point: ``stldecomp decompose|check|monitor|validate``.

Exit codes: 0 success, 1 infeasible or violated, 2 input error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .decompose import assemble_problem, decompose, plan_paths
from .errors import (ConflictError, DimensionError, GraphError, HorizonError, InfeasibleError, ScenarioError,
                     SynthesisError, UnboundedSetError, VertexBudgetError)
from .scenario import build_report, load_params, load_scenario, render_report, render_table
from .solver import check_point
from .stl import canonical_edge, spec_robustness
from .synthesis import SynthesisOptions, read_trajectory_csv, synthesize_trajectory, verify_implication, \
    write_trajectory_csv

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
KINDS = ("inclusion", "bounds", "type1", "type2", "type3", "type4")


def _options(args, scn):
    return scn.decompose_options(
        tol=getattr(args, "tol", None),
        nu_min=getattr(args, "nu_min", None),
        tbar_policy=getattr(args, "tbar_policy", None),
        max_cycle_len=getattr(args, "max_cycle_len", None),
    )


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, help="solver and audit tolerance (default 1e-6)")
    p.add_argument("--nu-min", type=float, help="smallest box side length (default 1e-3)")
    p.add_argument("--tbar-policy", choices=("midpoint", "start", "end"), help="instant chosen for F sub-tasks")
    p.add_argument("--max-cycle-len", type=int, help="longest cycle checked for conflicts (default 6)")


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def cmd_decompose(args, out) -> int:
    scn = load_scenario(args.scenario)
    result = decompose(scn.spec(), scn.comm_graph(), _options(args, scn))
    report = build_report(result, Path(args.scenario).name)
    if args.out:
        _write(args.out, render_report(report))
    out.write(render_table(report))
    return EXIT_OK


def _values_from_params(spec, entries):
    """Map parameter entries onto ``(origin, conjunct, edge)`` blocks and paths."""
    values, paths = {}, {}
    for e in entries:
        key = canonical_edge(*e.task)
        formula = spec.collaborative.get(key)
        if formula is None:
            raise ScenarioError(f"parameters given for {list(e.task)}, which has no collaborative task")
        if not 0 <= e.conjunct < len(formula):
            raise ScenarioError(f"conjunct {e.conjunct} out of range for task {list(e.task)}")
        origin = formula.agents
        rows = e.edges
        path = e.path
        if tuple(e.task) != origin:
            # written against the other orientation: walk the path backwards
            path = path[::-1]
            rows = [((s, r), -np.asarray(c), np.asarray(v)) for (r, s), c, v in reversed(rows)]
        if (path[0], path[-1]) != origin:
            raise ScenarioError(f"path {list(e.path)} does not join the agents of task {list(e.task)}")
        if key in paths and paths[key] != path:
            raise ScenarioError(f"conflicting paths for task {list(e.task)}")
        paths[key] = path
        for edge, c, v in rows:
            values[(origin, e.conjunct, tuple(edge))] = (np.asarray(c, dtype=float), np.asarray(v, dtype=float))
    return values, paths


def cmd_check(args, out) -> int:
    scn = load_scenario(args.scenario)
    spec = scn.spec()
    gc = scn.comm_graph()
    entries = load_params(args.params, scn.dim)
    values, given = _values_from_params(spec, entries)
    opts = _options(args, scn)
    paths = plan_paths(spec, gc, given)
    asm = assemble_problem(spec, gc, paths, opts)
    missing = [b.key for b in asm.problem.params.blocks if b.key not in values]
    if missing and not args.partial:
        raise ScenarioError(f"parameters missing for {len(missing)} sub-tasks (use --partial to skip them)")
    tol = args.tol if args.tol is not None else opts.tol
    report = check_point(asm.problem, values, tol=tol, allow_missing=args.partial)
    kinds = KINDS if args.kinds == "all" else tuple(k.strip() for k in args.kinds.split(","))
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ScenarioError(f"unknown constraint kinds {bad}; choose from {', '.join(KINDS)}")
    report = report.select(kinds)
    for label, margin in zip(report.labels, report.margins):
        shown = "skipped" if math.isnan(margin) else f"{margin:+.6f}"
        out.write(f"{label:<70} {shown}\n")
    verdict = "pass" if report.passed else "FAIL"
    out.write(f"min margin {report.min_margin:+.6f} over {report.evaluated.size} constraints "
              f"({report.skipped} skipped): {verdict}\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_monitor(args, out) -> int:
    scn = load_scenario(args.scenario)
    traj = read_trajectory_csv(args.trajectory)
    if args.which == "original":
        spec = scn.spec()
    else:
        spec = decompose(scn.spec(), scn.comm_graph(), _options(args, scn)).spec
    rho, breakdown = spec_robustness(spec, traj)
    for task, r in breakdown:
        out.write(f"{(task.name or str(task)):<40} {r:+.6f}\n")
    out.write(f"robustness ({args.which}): {rho:+.6f}\n")
    return EXIT_OK if rho > 0 else EXIT_FAIL


def cmd_validate(args, out) -> int:
    scn = load_scenario(args.scenario)
    opts = _options(args, scn)
    result = decompose(scn.spec(), scn.comm_graph(), opts)
    sopts = SynthesisOptions(dt=args.dt, vmax=args.vmax, tbar_policy=opts.tbar_policy)
    traj = synthesize_trajectory(result, scn.spec(), sopts)
    if args.trajectory_out:
        write_trajectory_csv(traj, args.trajectory_out)
    rep = verify_implication(traj, result.spec, scn.spec())
    out.write(f"status: {result.status.value}  audit conflicts: {len(result.audit)}\n")
    out.write(f"robustness rewritten: {rep.rho_rewritten:+.6f}\n")
    out.write(f"robustness original:  {rep.rho_original:+.6f}\n")
    out.write(f"verdict: {rep.verdict}\n")
    for name in rep.failing("rewritten"):
        out.write(f"  unsatisfied: {name}\n")
    return EXIT_OK if rep.verdict == "holds" and not result.audit else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stldecomp", description="Decompose multi-agent STL tasks over a communication graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="solve the decomposition and print the parameter table")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="write the machine-readable report here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("check", help="audit externally supplied sub-task parameters")
    p.add_argument("--scenario", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--kinds", default="all", help=f"comma list of {', '.join(KINDS)} (default all)")
    p.add_argument("--partial", action="store_true", help="skip constraints whose parameters are absent")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("monitor", help="robustness of a trajectory CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--which", choices=("original", "rewritten"), default="original")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("validate", help="decompose, synthesize a trajectory and check the implication")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trajectory-out")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--vmax", type=float, default=math.inf)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_validate)
    return parser


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args, out)
    except (InfeasibleError, ConflictError, SynthesisError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_FAIL
    except (ScenarioError, GraphError, HorizonError, DimensionError, UnboundedSetError, VertexBudgetError,
            KeyError, ValueError, OSError) as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
