"""Command line front end: ``c3sbb {solve,oracle,compare,sweep,reformulate}``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from typing import Optional

from . import c3model, oracle, scenario
from .c3model import BUILDERS, NetworkSpec, efficiency
from .errors import BudgetExceeded, C3Error, InfeasibleGamma, ScenarioError
from .reformulate import dump, reformulate
from .sbb import SolveReport, SolverParams, Status, solve

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NO_INCUMBENT = 3
EXIT_BUDGET = 4

log = logging.getLogger("c3sbb")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(v: float) -> str:
    """Six significant digits; exponent form only for magnitudes below 1e-4."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0:
        return "0"
    if abs(v) < 1e-4:
        return f"{v:.5e}"
    decimals = max(0, 5 - int(math.floor(math.log10(abs(v)))))
    return f"{v:.{decimals}f}"


def run_solve(spec: NetworkSpec, params: SolverParams, mode: str = "c3") -> SolveReport:
    problem = BUILDERS[mode](spec)
    sf = reformulate(problem)
    return solve(sf, problem, params)


def _cached_levels(spec: NetworkSpec, decision) -> list[int]:
    return [decision.cached_level(k) for k in spec.leaves]


def _assignment_lines(spec: NetworkSpec, decision) -> list[str]:
    out = []
    for k in spec.leaves:
        for i in range(spec.depth(k) + 1):
            out.append(f"leaf {k} level {i} node {spec.path(k)[i]} "
                       f"delta {fmt(decision.delta[(k, i)])} b {decision.cache.get((k, i), 0)}")
    return out


def _solve_or_exit(spec, params, mode):
    try:
        rep = run_solve(spec, params, mode)
    except InfeasibleGamma as exc:
        raise _Exit(EXIT_INFEASIBLE, f"infeasible: {exc}")
    if rep.status is Status.INFEASIBLE:
        raise _Exit(EXIT_INFEASIBLE, "infeasible: no point satisfies the constraints")
    if rep.incumbent is None:
        raise _Exit(EXIT_NO_INCUMBENT, f"time limit reached after {rep.elapsed:.1f}s without a feasible point")
    return rep


def cmd_solve(sc: scenario.Scenario) -> str:
    mode = "c3" if sc.mode == "compare" else sc.mode
    spec = sc.network
    rep = _solve_or_exit(spec, sc.solver, mode)
    problem = BUILDERS[mode](spec)
    decision = problem.structure.layout.from_point(rep.incumbent.original_point)
    lines = [
        "method sbb",
        f"mode {mode}",
        f"status {rep.status.value}",
        f"objective {fmt(rep.objective)}",
        f"lower_bound {fmt(rep.global_lower_bound)}",
        f"gap {fmt(rep.gap)}",
        f"regions {rep.regions_explored}",
        f"elapsed {rep.elapsed:.2f}",
    ]
    lines += _assignment_lines(spec, decision)
    if rep.trace:
        lines += ["trace"] + rep.trace
    return "\n".join(lines) + "\n"


def cmd_oracle(sc: scenario.Scenario, grid_step: float, budget: float = oracle.DEFAULT_BUDGET) -> str:
    spec = sc.network
    if spec.gamma > spec.total_data:
        raise _Exit(EXIT_INFEASIBLE, f"infeasible: gamma={spec.gamma} exceeds total data {spec.total_data}")
    try:
        res = oracle.brute_force(spec, grid_step, budget)
    except BudgetExceeded as exc:
        raise _Exit(EXIT_BUDGET, f"oracle budget exceeded: {exc.required} evaluations required, budget {exc.budget:g}")
    if res.decision is None:
        raise _Exit(EXIT_INFEASIBLE, "infeasible: no grid point satisfies the constraints")
    polished = oracle.polish(spec, res.decision)
    value = c3model.evaluate_total(spec, polished)
    lines = [
        "method oracle",
        f"grid {fmt(grid_step)}",
        f"placements {res.placements_enumerated}",
        f"grid_objective {fmt(res.objective)}",
        f"objective {fmt(value)}",
    ]
    lines += _assignment_lines(spec, polished)
    return "\n".join(lines) + "\n"


def _points(sc: scenario.Scenario):
    if sc.sweep is None:
        return [(None, sc.network)]
    vals = sc.sweep.values()
    if not vals:
        raise _Exit(EXIT_INVALID, "sweep produces no points")
    return [(v, sc.at(v)) for v in vals]


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def compare_rows(sc: scenario.Scenario):
    """``(axis value, mode, objective, eff vs c2o, eff vs c2a)`` per sweep point."""
    out = []
    for value, spec in _points(sc):
        obj = {m: _solve_or_exit(spec, sc.solver, m).objective for m in ("c3", "c2o", "c2a")}
        for m in ("c3", "c2o", "c2a"):
            out.append((value, m, obj[m], efficiency(obj["c2o"], obj[m]), efficiency(obj["c2a"], obj[m])))
    return out


def cmd_compare(sc: scenario.Scenario) -> str:
    rows = compare_rows(sc)
    header = ["mode", "objective", "efficiency_vs_c2o", "efficiency_vs_c2a"]
    if sc.sweep is not None:
        header = [sc.sweep.axis] + header
    body = []
    for value, m, obj, e_o, e_a in rows:
        row = [m, fmt(obj), fmt(e_o), fmt(e_a)]
        body.append(([fmt(value)] if sc.sweep is not None else []) + row)
    return _csv(header, body)


def sweep_rows(sc: scenario.Scenario):
    mode = "c3" if sc.mode == "compare" else sc.mode
    rows = []
    for value, spec in _points(sc):
        rep = _solve_or_exit(spec, sc.solver, mode)
        decision = BUILDERS[mode](spec).structure.layout.from_point(rep.incumbent.original_point)
        rows.append((value, rep.objective, _cached_levels(spec, decision)))
    return rows


def cmd_sweep(sc: scenario.Scenario) -> str:
    if sc.sweep is None:
        raise _Exit(EXIT_INVALID, "scenario has no [sweep] section")
    rows = sweep_rows(sc)
    header = [sc.sweep.axis, "objective"] + [f"cache_level_{k}" for k in sc.network.leaves]
    return _csv(header, [[fmt(v), fmt(o)] + [str(l) for l in levels] for v, o, levels in rows])


def cmd_reformulate(sc: scenario.Scenario) -> str:
    mode = "c3" if sc.mode == "compare" else sc.mode
    problem = BUILDERS[mode](sc.network, check_gamma=False)
    return dump(reformulate(problem))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="c3sbb", description="Joint compression and caching energy optimizer.")
    p.add_argument("command", choices=["solve", "oracle", "compare", "sweep", "reformulate"])
    p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
    p.add_argument("--epsilon", type=float, help="absolute optimality tolerance")
    p.add_argument("--time-limit", type=float, help="seconds per solve")
    p.add_argument("--grid", type=float, default=0.05, help="oracle grid step (default 0.05)")
    p.add_argument("--budget", type=float, default=oracle.DEFAULT_BUDGET, help="oracle evaluation budget")
    p.add_argument("--trace", action="store_true", help="include the region trace")
    p.add_argument("--out", help="write output here instead of stdout")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        sc = scenario.load(args.scenario)
        if args.epsilon is not None:
            sc.solver.epsilon = args.epsilon
        if args.time_limit is not None:
            sc.solver.time_limit = args.time_limit
        sc.solver.trace = args.trace
        SolverParams(sc.solver.epsilon, sc.solver.time_limit, sc.solver.delta_floor, sc.solver.theta)
        if args.command == "solve":
            text = cmd_solve(sc)
        elif args.command == "oracle":
            text = cmd_oracle(sc, args.grid, args.budget)
        elif args.command == "compare":
            text = cmd_compare(sc)
        elif args.command == "sweep":
            text = cmd_sweep(sc)
        else:
            text = cmd_reformulate(sc)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except _Exit as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (ScenarioError, ValueError, OSError, C3Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
