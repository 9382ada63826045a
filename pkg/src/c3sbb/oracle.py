"""Exhaustive reference optimizer for small networks.

Every per-leaf cache placement (one path node or none) is crossed with a
uniform grid on every delta.  The reported optimum is exactly the grid
minimum, but the search does not literally visit every grid combination:
leaves only interact through the QoI sum and through shared cache
capacity, so each leaf is tabulated on its own and the tables are joined
through their (data, energy) Pareto frontiers.  When a shared capacity
could bind, the join falls back to the plain cross product.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import local
from .c3model import DecisionVector, Layout, NetworkSpec, build_problem, energy, check_decision
from .errors import BudgetExceeded, InfeasibleDecision

DEFAULT_BUDGET = 1e8
_CHUNK = 2_000_000


@dataclass
class OracleResult:
    decision: Optional[DecisionVector]
    objective: float
    grid_step: float
    placements_enumerated: int


def grid_points(delta_floor: float, grid_step: float) -> np.ndarray:
    """Uniform points from ``delta_floor`` to 1, both ends included."""
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    count = int(math.floor((1.0 - delta_floor) / grid_step + 1e-9)) + 1
    pts = delta_floor + grid_step * np.arange(count)
    if pts[-1] < 1.0 - 1e-12:
        pts = np.append(pts, 1.0)
    pts[-1] = 1.0
    return pts


def required_evaluations(spec: NetworkSpec, grid_step: float) -> int:
    g = len(grid_points(spec.delta_floor, grid_step))
    placements = math.prod(spec.depth(k) + 2 for k in spec.leaves)
    n_delta = sum(spec.depth(k) + 1 for k in spec.leaves)
    return placements * g ** n_delta


class _LeafTable:
    """Every grid point of one leaf under one cache level."""

    def __init__(self, spec: NetworkSpec, k: int, level: int, grid: np.ndarray):
        path = spec.path(k)
        h = len(path) - 1
        mesh = np.meshgrid(*([grid] * (h + 1)), indexing="ij")
        d = np.stack([m.ravel() for m in mesh], axis=1)          # (P, h+1)
        suffix = np.ones((d.shape[0], h + 2))
        for i in range(h, -1, -1):
            suffix[:, i] = d[:, i] * suffix[:, i + 1]
        y = spec.y[k]
        r1 = spec.requests[k] - 1
        serve = y * (spec.w_ca * spec.period + r1 * spec.nodes[k].eps_t)
        e = np.zeros(d.shape[0])
        for i in range(h + 1):
            node = spec.nodes[path[i]]
            f = node.eps_r + node.eps_t * d[:, i] + node.eps_c * (1.0 / d[:, i] - 1.0)
            moved = f * suffix[:, i + 1]
            cached = 1.0 if 0 <= level <= i else 0.0
            e += y * moved * (1.0 + r1 * (1.0 - cached))
            if i == level:
                e += serve * suffix[:, i]
        self.k = k
        self.level = level
        self.cache_node = path[level] if level >= 0 else None
        self.deltas = d
        self.data = y * suffix[:, 0]
        self.energy = e
        self.load = y * suffix[:, level] if level >= 0 else np.zeros(d.shape[0])

    def restrict(self, mask):
        self.deltas = self.deltas[mask]
        self.data = self.data[mask]
        self.energy = self.energy[mask]
        self.load = self.load[mask]


def _frontier(data, en):
    """Indices of the (more data, less energy) Pareto points, data ascending."""
    order = np.lexsort((en, -data))           # data descending, energy ascending
    best = np.minimum.accumulate(en[order])
    keep = np.ones(len(order), dtype=bool)
    keep[1:] = en[order][1:] < best[:-1]
    idx = order[keep]
    return idx[::-1]


def _join_frontiers(tables, gamma):
    """Best energy and per-leaf point indices, QoI the only coupling."""
    # fold all but the last leaf into a single frontier of partial sums
    fr0 = _frontier(tables[0].data, tables[0].energy)
    data = tables[0].data[fr0]
    en = tables[0].energy[fr0]
    picks = fr0[:, None]
    for t in tables[1:-1]:
        fr = _frontier(t.data, t.energy)
        sd = (data[:, None] + t.data[fr][None, :]).ravel()
        se = (en[:, None] + t.energy[fr][None, :]).ravel()
        pa = np.repeat(np.arange(len(data)), len(fr))
        pb = np.tile(fr, len(data))
        keep = _frontier(sd, se)
        data, en = sd[keep], se[keep]
        picks = np.column_stack([picks[pa[keep]], pb[keep]])
    last = tables[-1]
    if len(tables) == 1:
        ok = data >= gamma
        if not ok.any():
            return math.inf, None
        cand = np.flatnonzero(ok)
        i = int(cand[np.argmin(en[cand])])
        return float(en[i]), [int(picks[i, 0])]
    fl = _frontier(last.data, last.energy)
    ld, le = last.data[fl], last.energy[fl]
    need = gamma - data
    pos = np.searchsorted(ld, need, side="left")
    valid = pos < len(ld)
    if not valid.any():
        return math.inf, None
    total = np.full(len(data), math.inf)
    total[valid] = en[valid] + le[pos[valid]]
    i = int(np.argmin(total))
    if math.isinf(total[i]):
        return math.inf, None
    return float(total[i]), [int(p) for p in picks[i]] + [int(fl[pos[i]])]


def _join_full(tables, gamma, caps):
    """Plain cross product, used when a shared cache capacity may bind."""
    best, best_pick = math.inf, None
    sizes = [len(t.data) for t in tables]
    rest = sizes[1:]
    for i0 in range(sizes[0]):
        grids = np.meshgrid(*[np.arange(s) for s in rest], indexing="ij") if rest else []
        idx = [np.full(max(1, math.prod(rest)), i0)] + [g.ravel() for g in grids]
        data = sum(t.data[ix] for t, ix in zip(tables, idx))
        en = sum(t.energy[ix] for t, ix in zip(tables, idx))
        ok = data >= gamma
        for node, cap in caps.items():
            load = sum(t.load[ix] for t, ix in zip(tables, idx) if t.cache_node == node)
            ok &= load <= cap * (1 + 1e-12)
        if ok.any():
            cand = np.flatnonzero(ok)
            j = int(cand[np.argmin(en[cand])])
            if en[j] < best:
                best = float(en[j])
                best_pick = [int(ix[j]) for ix in idx]
    return best, best_pick


def brute_force(spec: NetworkSpec, grid_step: float, budget: float = DEFAULT_BUDGET) -> OracleResult:
    """Grid-and-placement minimum of the total energy."""
    need = required_evaluations(spec, grid_step)
    if need > budget:
        raise BudgetExceeded(need, budget)
    grid = grid_points(spec.delta_floor, grid_step)
    leaves = spec.leaves
    best = math.inf
    best_decision = None
    enumerated = 0
    options = [range(-1, spec.depth(k) + 1) for k in leaves]
    for placement in itertools.product(*options):
        enumerated += 1
        tables = [_LeafTable(spec, k, lvl, grid) for k, lvl in zip(leaves, placement)]
        shared: dict[int, list[_LeafTable]] = {}
        for t in tables:
            if t.cache_node is not None:
                t.restrict(t.load <= spec.capacity(t.cache_node) * (1 + 1e-12))
                shared.setdefault(t.cache_node, []).append(t)
        if any(len(t.data) == 0 for t in tables):
            continue
        binding = {v: spec.capacity(v) for v, ts in shared.items()
                   if len(ts) > 1 and sum(spec.y[t.k] for t in ts) > spec.capacity(v)}
        if binding:
            value, pick = _join_full(tables, spec.gamma, binding)
        else:
            value, pick = _join_frontiers(tables, spec.gamma)
        if pick is not None and value < best:
            best = value
            delta, cache = {}, {}
            for t, p in zip(tables, pick):
                for i, dv in enumerate(t.deltas[p]):
                    delta[(t.k, i)] = float(dv)
                    cache[(t.k, i)] = int(i == t.level)
            best_decision = DecisionVector(delta, cache)
    if best_decision is not None:
        best = energy(spec, best_decision)
    return OracleResult(best_decision, best, grid_step, enumerated)


def polish(spec: NetworkSpec, decision: DecisionVector, tol: float = local.TOL) -> DecisionVector:
    """Refine the deltas of a feasible decision at fixed cache bits."""
    check_decision(spec, decision)
    problem = build_problem(spec, check_gamma=False)
    lay: Layout = problem.structure.layout
    x = np.array(lay.to_point(decision), dtype=float)
    lo = np.array([v.lower for v in problem.variables])
    hi = np.array([v.upper for v in problem.variables])
    for idx in lay.cache_index.values():
        lo[idx] = hi[idx] = x[idx]
    start = energy(spec, decision)
    y = local.improve(problem, x, lo, hi, sweeps=local.SWEEPS, tol=tol, until_stable=True)
    if y is None:
        return decision
    out = lay.from_point(y)
    try:
        check_decision(spec, out)
    except InfeasibleDecision:
        return decision
    return out if energy(spec, out) <= start else decision
