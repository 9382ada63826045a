import math

import numpy as np
import pytest

from c3sbb import c3model
from c3sbb.errors import EmptyList
from c3sbb.expr import Problem, Var, VariableInfo, VarKind
from c3sbb.reformulate import IntervalBounds, derive_bounds, lift_point, reformulate
from c3sbb.sbb import (Incumbent, Region, RegionList, SolverParams, Status, _Brancher, branch,
                       fathom_sweep, lower_bound, select_region, solve, upper_bound)


def _regions(bounds):
    rl = RegionList()
    for lb in bounds:
        rl.push(Region(IntervalBounds([0.0], [1.0]), lower_bound=lb))
    return rl


def test_select_least_lower_bound():
    assert select_region(_regions([0.5, 0.2, 0.9])).lower_bound == 0.2
    rl = _regions([0.2, 0.2])
    first = select_region(rl)
    assert first.seq == 0
    assert select_region(_regions([0.7])).lower_bound == 0.7
    with pytest.raises(EmptyList):
        select_region(RegionList())


def test_fathom_sweep():
    rl = _regions([0.040, 0.0389, 0.037])
    assert fathom_sweep(rl, 0.039, 0.001) == 2
    assert [r.lower_bound for r in rl] == [0.037]
    empty = RegionList()
    assert fathom_sweep(empty, 0.039, 0.001) == 0
    rl = _regions([0.01, 0.02])
    assert fathom_sweep(rl, 0.039, 0.001) == 0 and len(rl) == 2


def _two_node(gamma=1000.0, cap=None):
    spec = c3model.two_node(gamma).with_capacity(cap)
    problem = c3model.build_problem(spec, check_gamma=False)
    return spec, problem, reformulate(problem)


def test_lower_bound_cache_once_violated():
    _, problem, sf = _two_node()
    lay = problem.structure.layout
    box = sf.original_bounds()
    for key in [(1, 0), (1, 1)]:
        box.lower[lay.cache_index[key]] = 1.0
    assert lower_bound(derive_bounds(sf, box), sf) is None


def test_root_lower_bound_below_optimum():
    _, _, sf = _two_node()
    lb, w = lower_bound(derive_bounds(sf), sf)
    assert lb <= 0.039


def test_root_lower_bound_below_known_point():
    spec, problem, sf = _two_node()
    lb, _ = lower_bound(derive_bounds(sf), sf)
    d = c3model.DecisionVector({(1, 0): 1.0, (1, 1): 1.0}, {(1, 0): 1, (1, 1): 0})
    assert lb <= c3model.evaluate_total(spec, d) + 1e-12


def test_fixed_box_lower_bound_is_exact():
    spec, problem, sf = _two_node(500.0)
    lay = problem.structure.layout
    d = c3model.DecisionVector({(1, 0): 0.8, (1, 1): 0.625}, {(1, 0): 1, (1, 1): 0})
    x = np.array(lay.to_point(d))
    lb, w = lower_bound(derive_bounds(sf, IntervalBounds(x, x)), sf)
    assert lb == pytest.approx(c3model.evaluate_total(spec, d), rel=1e-9)


def test_upper_bound_examples():
    spec, problem, sf = _two_node()
    region = Region(derive_bounds(sf))
    region.lower_bound, region.relaxation_point = lower_bound(region.box, sf)
    value, x = upper_bound(region, sf, problem)
    assert value == pytest.approx(0.0391, rel=1e-9)
    assert value == pytest.approx(c3model.evaluate_total(spec, problem.structure.layout.from_point(x)))
    # an already integral, feasible relaxation point is matched or beaten
    lay = problem.structure.layout
    start = lift_point(sf, lay.to_point(c3model.DecisionVector({(1, 0): 1.0, (1, 1): 1.0},
                                                               {(1, 0): 0, (1, 1): 1})))
    region.relaxation_point = start
    value, _ = upper_bound(region, sf, problem)
    assert value <= problem.objective_value(start[:sf.n_original]) + 1e-12


def test_upper_bound_not_found():
    _, problem, sf = _two_node(500.0, cap=0.0)
    lay = problem.structure.layout
    box = sf.original_bounds()
    b0 = lay.cache_index[(1, 0)]
    box.lower[b0] = box.upper[b0] = 1.0
    region = Region(derive_bounds(sf, box))
    region.relaxation_point = (box.lower + box.upper) / 2
    assert upper_bound(region, sf, problem) is None


def _toy(kinds):
    vs = [VariableInfo(f"x{i}", k) for i, k in enumerate(kinds)]
    return vs


def test_brancher_single_error_triple():
    vs = _toy([VarKind.CONTINUOUS] * 4)
    p = Problem(vs, Var(0) * Var(1) + Var(2) * Var(3))
    sf = reformulate(p)
    x = np.array([0.3, 0.6, 0.5, 0.5])
    w = lift_point(sf, x)
    k2 = sf.t_bt[1][2]
    w[k2] = 0.0
    region = Region(derive_bounds(sf), relaxation_point=w)
    t, err, cands = _Brancher(sf).choose(region, w, None, SolverParams())
    assert t == 1 and err == pytest.approx(0.25)
    assert cands == [2, 3]


def test_branch_prefers_binary():
    vs = _toy([VarKind.BINARY, VarKind.CONTINUOUS])
    sf = reformulate(Problem(vs, Var(0) * Var(1)))
    w = lift_point(sf, [0.5, 0.5])
    w[sf.t_bt[0][2]] = 0.0
    region = Region(derive_bounds(sf), relaxation_point=w)
    left, right, var = branch(region, w, None, SolverParams(), sf)
    assert var == 0
    assert left.box[0] == (0.0, 0.0) and right.box[0] == (1.0, 1.0)
    assert left.box[1] == right.box[1] == (0.0, 1.0)


def test_branch_midpoint_rule():
    vs = _toy([VarKind.CONTINUOUS] * 2)
    sf = reformulate(Problem(vs, Var(0) * Var(1)))
    w = lift_point(sf, [0.9, 0.5])
    w[sf.t_bt[0][2]] = 0.0
    region = Region(derive_bounds(sf), relaxation_point=w)
    left, right, var = branch(region, w, None, SolverParams(), sf)
    assert var == 1
    assert left.box[1] == (0.0, 0.5) and right.box[1] == (0.5, 1.0)


def test_branch_value_rules():
    vs = _toy([VarKind.CONTINUOUS] * 2)
    sf = reformulate(Problem(vs, Var(0) * Var(1)))
    w = lift_point(sf, [0.0, 0.5])
    w[sf.t_bt[0][2]] = 0.3
    params = SolverParams()
    # a relaxation value on the bound is clamped inside by theta
    region = Region(derive_bounds(sf), relaxation_point=w)
    left, right, var = branch(region, w, None, params, sf)
    lo, hi = region.box[var]
    cut = left.box.upper[var]
    assert lo < cut < hi
    # an incumbent strictly inside the range overrides the relaxation value
    inc = Incumbent(lift_point(sf, [0.4, 0.4]), 0.16, np.array([0.4, 0.4]))
    left, _, var = branch(region, w, inc, params, sf)
    assert left.box.upper[var] == pytest.approx(0.4)
    # without an incumbent the region's own upper-bound point is used
    region.upper_point = np.array([0.3, 0.3])
    left, _, var = branch(region, w, None, params, sf)
    assert left.box.upper[var] == pytest.approx(0.3)


def test_children_partition_parent():
    _, problem, sf = _two_node(500.0)
    region = Region(derive_bounds(sf))
    region.lower_bound, region.relaxation_point = lower_bound(region.box, sf)
    left, right, var = branch(region, region.relaxation_point, None, SolverParams(), sf)
    n0 = sf.n_original
    for v in range(n0):
        if v == var:
            assert left.box.lower[v] == region.box.lower[v]
            assert right.box.upper[v] == region.box.upper[v]
            assert left.box.upper[v] <= right.box.lower[v]
            if not problem.variables[v].is_binary:
                assert left.box.upper[v] == right.box.lower[v]
        else:
            assert left.box[v] == right.box[v] == region.box[v]


def test_solve_two_node():
    spec, problem, sf = _two_node()
    rep = solve(sf, problem)
    assert rep.status is Status.EPSILON_OPTIMAL
    assert rep.objective == pytest.approx(0.039, rel=0.05)
    assert rep.gap <= 0.001
    x = rep.incumbent.original_point
    assert problem.max_violation(x) <= 1e-6
    assert rep.objective == pytest.approx(problem.objective_value(x), rel=1e-9)


def test_solve_infeasible_gamma():
    spec, problem, sf = _two_node(1001.0)
    rep = solve(sf, problem)
    assert rep.status is Status.INFEASIBLE and rep.incumbent is None
    assert math.isinf(rep.objective)


def test_solve_deterministic():
    _, problem, sf = _two_node(500.0)
    a = solve(sf, problem, SolverParams(trace=True))
    b = solve(sf, problem, SolverParams(trace=True))
    assert a == b and a.trace


@pytest.mark.parametrize("name,gamma", [("two_node", 250.0), ("three_node", 500.0), ("four_node", 1000.0)])
def test_trace_monotone(name, gamma):
    spec = c3model.TOPOLOGIES[name](gamma)
    problem = c3model.build_problem(spec)
    sf = reformulate(problem)
    rep = solve(sf, problem, SolverParams(trace=True))
    lbs = [float(line.split()[1]) for line in rep.trace]
    ubs = [float(line.split()[2]) for line in rep.trace]
    assert all(b >= a for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(ubs, ubs[1:]))
    assert rep.status is Status.EPSILON_OPTIMAL
    assert rep.objective - rep.global_lower_bound <= 0.001


def test_time_limit_keeps_incumbent():
    spec = c3model.seven_node(2000.0)
    problem = c3model.build_problem(spec)
    rep = solve(reformulate(problem), problem, SolverParams(time_limit=1e-3))
    assert rep.status is Status.TIME_LIMIT
    assert rep.regions_explored >= 1
