import numpy as np
import pytest

from c3sbb import c3model, oracle
from c3sbb.c3model import DecisionVector
from c3sbb.errors import BudgetExceeded
from c3sbb.reformulate import reformulate
from c3sbb.sbb import solve


def test_grid_points():
    g = oracle.grid_points(1e-4, 0.05)
    assert g[0] == 1e-4 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)
    assert len(oracle.grid_points(0.0, 0.25)) == 5
    with pytest.raises(ValueError):
        oracle.grid_points(0.0, 0.0)


def test_two_node_full_gamma():
    spec = c3model.two_node(1000.0)
    res = oracle.brute_force(spec, 0.05)
    assert res.placements_enumerated == 3
    assert res.decision.delta == {(1, 0): 1.0, (1, 1): 1.0}
    assert res.decision.cached_level(1) == 0
    assert res.objective == pytest.approx(0.0391, rel=1e-12)
    assert res.objective == c3model.evaluate_total(spec, res.decision)


def test_zero_capacity_leaves_no_cache_placement():
    spec = c3model.two_node(500.0).with_capacity(0.0)
    res = oracle.brute_force(spec, 0.05)
    assert res.decision.cached_level(1) == -1
    three = c3model.three_node(500.0).with_capacity(0.0)
    res = oracle.brute_force(three, 0.1)
    assert all(res.decision.cached_level(k) == -1 for k in three.leaves)


def test_two_node_half_gamma():
    res = oracle.brute_force(c3model.two_node(500.0), 0.01)
    assert res.objective == pytest.approx(0.026, rel=0.05)


def test_polish_descends():
    spec = c3model.two_node(500.0)
    res = oracle.brute_force(spec, 0.05)
    out = oracle.polish(spec, res.decision)
    assert c3model.evaluate_total(spec, out) <= res.objective
    c3model.check_decision(spec, out)


def test_polish_keeps_optimal_point():
    spec = c3model.two_node(1000.0)
    d = DecisionVector({(1, 0): 1.0, (1, 1): 1.0}, {(1, 0): 1, (1, 1): 0})
    out = oracle.polish(spec, d)
    for key, v in d.delta.items():
        assert out.delta[key] == pytest.approx(v, abs=1e-8)
    # a non-degenerate optimum found by polishing is a fixed point too
    start = oracle.polish(spec.with_gamma(500.0), oracle.brute_force(spec.with_gamma(500.0), 0.05).decision)
    again = oracle.polish(spec.with_gamma(500.0), start)
    assert c3model.evaluate_total(spec.with_gamma(500.0), again) == pytest.approx(
        c3model.evaluate_total(spec.with_gamma(500.0), start), abs=1e-8)


def test_three_node_polished():
    spec = c3model.three_node(1000.0)
    res = oracle.brute_force(spec, 0.05)
    value = c3model.evaluate_total(spec, oracle.polish(spec, res.decision))
    assert value == pytest.approx(0.019, rel=0.05)


def test_budget_exceeded():
    spec = c3model.seven_node(1000.0)
    with pytest.raises(BudgetExceeded) as info:
        oracle.brute_force(spec, 0.01)
    assert info.value.required == oracle.required_evaluations(spec, 0.01)
    assert info.value.required > oracle.DEFAULT_BUDGET


@pytest.mark.parametrize("name,gamma", [("two_node", 300.0), ("three_node", 700.0)])
def test_finer_grid_never_worse(name, gamma):
    spec = c3model.TOPOLOGIES[name](gamma)
    # each grid refines the previous one
    values = [oracle.brute_force(spec, step).objective for step in (0.2, 0.1, 0.05)]
    assert values[1] <= values[0] + 1e-15 and values[2] <= values[1] + 1e-15


@pytest.mark.parametrize("name,gamma,step", [
    ("two_node", 250.0, 0.01),
    ("two_node", 750.0, 0.01),
    ("three_node", 500.0, 0.05),
    ("four_node", 1000.0, 0.1),
])
def test_oracle_above_sbb_lower_bound(name, gamma, step):
    spec = c3model.TOPOLOGIES[name](gamma)
    problem = c3model.build_problem(spec)
    rep = solve(reformulate(problem), problem)
    res = oracle.brute_force(spec, step)
    assert res.objective >= rep.global_lower_bound - 1e-7
    polished = c3model.evaluate_total(spec, oracle.polish(spec, res.decision))
    # empirical slack: the grid optimum is never far from the continuous one here
    assert abs(polished - rep.objective) <= 0.001 + 0.05 * step
