"""Spatial branch-and-bound over the standard form (the V-SBB variant).

Regions are boxes over every standard-form variable.  Only the original
variables are ever split; auxiliary bounds are recomputed from them by
interval propagation whenever a child is made.  Lower bounds come from
the McCormick MILP relaxation, upper bounds from the round-repair-descend
heuristic in :mod:`c3sbb.local`.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import local
from .errors import DegenerateBox, EmptyList
from .expr import Problem
from .lp import solve_milp
from .reformulate import (IntervalBounds, StandardForm, derive_bounds, lift_point,
                          original_dependencies, triple_error)
from .relax import build_relaxation

log = logging.getLogger(__name__)

_WIDTH_TOL = 1e-9


class Status(enum.Enum):
    EPSILON_OPTIMAL = "EpsilonOptimal"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass
class SolverParams:
    epsilon: float = 0.001
    time_limit: float = 400.0
    delta_floor: float = 1e-4
    theta: float = 0.01
    trace: bool = False

    EXTENDED_TIME_LIMIT = 7200.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.theta < 0.5:
            raise ValueError("theta must lie in (0, 0.5)")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")


@dataclass
class Region:
    box: IntervalBounds
    lower_bound: float = -math.inf
    relaxation_point: Optional[np.ndarray] = None
    depth: int = 0
    seq: int = 0
    upper_point: Optional[np.ndarray] = None     # original slice of the region's own upper bound


@dataclass
class Incumbent:
    point: np.ndarray
    objective: float
    original_point: np.ndarray


@dataclass
class SolveReport:
    status: Status
    incumbent: Optional[Incumbent]
    global_lower_bound: float
    gap: float
    regions_explored: int
    elapsed: float = field(default=0.0, compare=False)
    trace: list[str] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.incumbent.objective if self.incumbent else math.inf

    def __eq__(self, other):
        if not isinstance(other, SolveReport):
            return NotImplemented
        same_inc = (self.incumbent is None) == (other.incumbent is None)
        if same_inc and self.incumbent is not None:
            same_inc = (self.incumbent.objective == other.incumbent.objective
                        and np.array_equal(self.incumbent.original_point, other.incumbent.original_point))
        return (same_inc and self.status == other.status
                and self.global_lower_bound == other.global_lower_bound
                and self.gap == other.gap and self.regions_explored == other.regions_explored
                and self.trace == other.trace)


class RegionList:
    """Active regions ordered by lower bound, then insertion order."""

    def __init__(self):
        self._heap: list[tuple[float, int, Region]] = []
        self._counter = itertools.count()

    def __len__(self):
        return len(self._heap)

    def __iter__(self):
        return (r for _, _, r in sorted(self._heap, key=lambda t: (t[0], t[1])))

    def push(self, region: Region) -> None:
        region.seq = next(self._counter)
        heapq.heappush(self._heap, (region.lower_bound, region.seq, region))

    def pop(self) -> Region:
        if not self._heap:
            raise EmptyList("no active regions")
        return heapq.heappop(self._heap)[2]

    def min_bound(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def remove_if(self, pred: Callable[[Region], bool]) -> int:
        keep = [t for t in self._heap if not pred(t[2])]
        dropped = len(self._heap) - len(keep)
        if dropped:
            heapq.heapify(keep)
            self._heap = keep
        return dropped


def select_region(regions: RegionList) -> Region:
    """Pop the region with the least lower bound (earliest on ties)."""
    return regions.pop()


def fathom_sweep(regions: RegionList, phi_u: float, epsilon: float) -> int:
    """Drop every region whose lower bound cannot beat ``phi_u`` by more than ``epsilon``."""
    return regions.remove_if(lambda r: r.lower_bound >= phi_u - epsilon)


def lower_bound(box: IntervalBounds, sf: StandardForm):
    """``(phi_l, w)`` from the MILP relaxation over ``box``, or None if infeasible."""
    lp = build_relaxation(sf, box)
    sol = solve_milp(lp)
    if not sol.optimal:
        return None
    return sol.objective, sol.point


def upper_bound(region: Region, sf: StandardForm, original: Problem):
    """``(phi_u_R, original_point)`` from the heuristic, or None when repair fails."""
    n0 = sf.n_original
    start = region.relaxation_point[:n0] if region.relaxation_point is not None \
        else (region.box.lower[:n0] + region.box.upper[:n0]) / 2
    x = local.improve(original, start, region.box.lower[:n0], region.box.upper[:n0])
    if x is None:
        return None
    return original.objective_value(x), x


def _branch_value(i, region: Region, w, incumbent: Optional[Incumbent]) -> float:
    lo, hi = region.box[i]
    value = float(w[i])
    if incumbent is not None and lo < incumbent.original_point[i] < hi:
        return float(incumbent.original_point[i])
    if region.upper_point is not None:
        value = float(region.upper_point[i])
    return value


def _split(region: Region, i: int, value: float, params: SolverParams, binary: bool):
    lo, hi = region.box[i]
    left = region.box.copy()
    right = region.box.copy()
    if binary:
        left.upper[i] = 0.0
        right.lower[i] = 1.0
    else:
        span = hi - lo
        value = min(max(value, lo + params.theta * span), hi - params.theta * span)
        left.upper[i] = value
        right.lower[i] = value
    return (Region(left, region.lower_bound, depth=region.depth + 1),
            Region(right, region.lower_bound, depth=region.depth + 1))


class _Brancher:
    def __init__(self, sf: StandardForm):
        self.sf = sf
        self.deps = original_dependencies(sf)
        self.binary = set(sf.binary_indices())
        self.triples = sf.triples

    def candidates(self, kind, i, j, k) -> list[int]:
        return sorted(self.deps[i] | self.deps[j])

    def choose(self, region: Region, w, incumbent, params: SolverParams):
        box = region.box
        splittable = lambda v: box.upper[v] - box.lower[v] > _WIDTH_TOL
        errors = [triple_error(kind, i, j, k, w) for kind, i, j, k in self.triples]
        order = sorted(range(len(errors)), key=lambda t: (-errors[t], t))
        for t in order:
            cands = [v for v in self.candidates(*self.triples[t]) if splittable(v)]
            if cands:
                return t, errors[t], cands
        rest = [v for v in range(self.sf.n_original) if splittable(v)]
        if not rest:
            raise DegenerateBox("every original interval is degenerate")
        rest.sort(key=lambda v: (-(box.upper[v] - box.lower[v]), v))
        return -1, 0.0, rest[:1]


def branch(region: Region, relaxation_point, incumbent: Optional[Incumbent],
           params: SolverParams, sf: StandardForm, brancher: Optional[_Brancher] = None):
    """Split ``region`` on the variable picked by the max-error rule."""
    brancher = brancher or _Brancher(sf)
    w = relaxation_point
    _, _, cands = brancher.choose(region, w, incumbent, params)
    discrete = [v for v in cands if v in brancher.binary]
    if discrete and len(discrete) < len(cands):
        cands = discrete
    best, best_score, best_value = -1, math.inf, 0.0
    for v in cands:
        lo, hi = region.box[v]
        value = _branch_value(v, region, w, incumbent)
        score = abs(0.5 - (value - lo) / (hi - lo))
        if score < best_score - 1e-15:
            best, best_score, best_value = v, score, value
    left, right = _split(region, best, best_value, params, best in brancher.binary)
    left.box = derive_bounds(sf, left.box)
    right.box = derive_bounds(sf, right.box)
    return left, right, best


def solve(sf: StandardForm, original: Problem, params: Optional[SolverParams] = None) -> SolveReport:
    params = params or SolverParams()
    start = time.monotonic()
    eps = params.epsilon
    trace: list[str] = []
    brancher = _Brancher(sf)

    def note(region, lb, ub, action):
        # one line per processed region: id, its lower bound, incumbent value, action
        if params.trace:
            trace.append(f"{region.seq} {lb:.10g} {ub:.10g} {action}")

    phi_u = math.inf
    incumbent: Optional[Incumbent] = None
    closed_lb = math.inf        # least lower bound among regions discarded by bound tests
    explored = 0
    regions = RegionList()

    root = Region(derive_bounds(sf))
    lb = lower_bound(root.box, sf)
    explored += 1
    if lb is not None:
        root.lower_bound, root.relaxation_point = lb
        regions.push(root)
    timed_out = False

    while len(regions):
        if time.monotonic() - start > params.time_limit:
            timed_out = True
            break
        region = select_region(regions)
        if region.lower_bound >= phi_u - eps:
            closed_lb = min(closed_lb, region.lower_bound)
            note(region, region.lower_bound, phi_u, "fathom")
            continue
        ub = upper_bound(region, sf, original)
        ub_value = math.inf
        if ub is not None:
            ub_value, x = ub
            region.upper_point = x
            if ub_value < phi_u:
                phi_u = ub_value
                incumbent = Incumbent(lift_point(sf, x), ub_value, x.copy())
                fathom_sweep_lbs = [r.lower_bound for r in regions if r.lower_bound >= phi_u - eps]
                if fathom_sweep_lbs:
                    closed_lb = min(closed_lb, min(fathom_sweep_lbs))
                fathom_sweep(regions, phi_u, eps)
        if ub_value - region.lower_bound <= eps or region.lower_bound >= phi_u - eps:
            closed_lb = min(closed_lb, region.lower_bound)
            note(region, region.lower_bound, phi_u, "done")
            continue
        left, right, var = branch(region, region.relaxation_point, incumbent, params, sf, brancher)
        note(region, region.lower_bound, phi_u, f"branch w{var}")
        for child in (left, right):
            res = lower_bound(child.box, sf)
            explored += 1
            if res is None:
                continue
            child.lower_bound = max(res[0], region.lower_bound)
            child.relaxation_point = res[1]
            if child.lower_bound >= phi_u - eps:
                closed_lb = min(closed_lb, child.lower_bound)
                continue
            regions.push(child)

    elapsed = time.monotonic() - start
    glb = min(closed_lb, regions.min_bound(), phi_u)
    if incumbent is None:
        status = Status.TIME_LIMIT if timed_out else Status.INFEASIBLE
        return SolveReport(status, None, glb, math.inf, explored, elapsed, trace)
    gap = max(phi_u - glb, 0.0)
    status = Status.TIME_LIMIT if timed_out else Status.EPSILON_OPTIMAL
    return SolveReport(status, incumbent, glb, gap, explored, elapsed, trace)
