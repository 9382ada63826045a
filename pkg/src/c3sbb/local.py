"""Round-repair-descend heuristic shared by the solver and the oracle.

Given a (possibly fractional) point and a box on the original variables,
produce a feasible point with a good objective:

1. round binaries (fixed ones keep their value);
2. unset surplus cache bits, deepest level first, until every leaf holds
   at most one copy and every node's cache fits;
3. lift the delivered data up to the QoI threshold by scaling the deltas
   of the path with the most headroom;
4. cyclic golden-section search on each delta, re-projecting onto the
   QoI row after every trial value.

Problems built by :mod:`c3model` carry structure that makes this fast;
other problems get a generic fallback that only rounds, clips and
descends while staying feasible.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .c3model import C3Structure, per_bit_value
from .expr import Problem

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SWEEPS = 2
TOL = 1e-8
_FEAS = 1e-9
_MAX_SWEEPS = 100


def golden_section(f, lo: float, hi: float, tol: float = TOL):
    """Minimizer of ``f`` on ``[lo, hi]`` assuming unimodality; also tries the ends."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    best = min(((fc, c), (fd, d), (f(lo), lo), (f(hi), hi)), key=lambda t: t[0])
    return best[1], best[0]


class _Fast:
    """Flat numeric view of a C3 problem for quick evaluation."""

    def __init__(self, st: C3Structure):
        spec = st.spec
        lay = st.layout
        self.spec = spec
        self.fixed = st.fixed_delta
        self.leaves = lay.leaves
        self.dix = {k: [lay.delta_index[(k, i)] for i in range(lay.height(k) + 1)] for k in lay.leaves}
        self.bix = {k: [lay.cache_index[(k, i)] for i in range(lay.height(k) + 1)] for k in lay.leaves}
        self.nodes = {k: [spec.nodes[v] for v in lay.paths[k]] for k in lay.leaves}
        self.y = spec.y
        self.serve = {k: spec.y[k] * (spec.w_ca * spec.period + (spec.requests[k] - 1) * spec.nodes[k].eps_t)
                      for k in lay.leaves}
        self.r1 = {k: spec.requests[k] - 1 for k in lay.leaves}
        self.gamma = spec.gamma
        # capacity rows: node -> (level, leaves)
        self.caps = []
        for v in range(len(spec.nodes)):
            hv = spec.depth(v)
            ks = spec.descendant_leaves(v)
            if ks:
                self.caps.append((hv, v, ks, spec.capacity(v)))
        self.caps.sort(key=lambda t: (-t[0], t[1]))

    def deltas(self, x, k):
        if self.fixed:
            return [1.0] * len(self.dix[k])
        return [x[i] for i in self.dix[k]]

    def energy(self, x) -> float:
        total = 0.0
        for k in self.leaves:
            d = self.deltas(x, k)
            bits = [x[i] for i in self.bix[k]]
            h = len(d) - 1
            suffix = 1.0
            suf = [1.0] * (h + 2)
            for i in range(h, -1, -1):
                suffix *= d[i]
                suf[i] = suffix
            cached = 0.0
            y, r1, serve = self.y[k], self.r1[k], self.serve[k]
            for i in range(h + 1):
                moved = per_bit_value(self.nodes[k][i], d[i]) * suf[i + 1]
                cached += bits[i]
                total += y * moved * (1.0 + r1 * (1.0 - cached)) + serve * bits[i] * suf[i]
        return total

    def path_data(self, x, k) -> float:
        return self.y[k] * math.prod(self.deltas(x, k))

    def delivered(self, x) -> float:
        return sum(self.path_data(x, k) for k in self.leaves)

    def load(self, x, hv, ks) -> float:
        s = 0.0
        for k in ks:
            if x[self.bix[k][hv]] > 0.5:
                s += self.y[k] * math.prod(self.deltas(x, k)[hv:])
        return s

    def capacity_ok(self, x) -> bool:
        return all(self.load(x, hv, ks) <= cap * (1 + _FEAS) + _FEAS for hv, _, ks, cap in self.caps)


def _scale_path(fx: _Fast, x, k, idxs, hi, target) -> None:
    """Scale ``x[idxs]`` by a common factor (clipped at ``hi``) so leaf ``k`` delivers ``target``."""
    if fx.path_data(x, k) >= target:
        return
    base = {i: x[i] for i in idxs}
    top = max(hi[i] / base[i] for i in idxs)

    def data(t):
        for i in idxs:
            x[i] = min(base[i] * t, hi[i])
        return fx.path_data(x, k)

    if data(top) < target:
        return
    lo_t, hi_t = 1.0, top
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        if data(mid) >= target:
            hi_t = mid
        else:
            lo_t = mid
        if hi_t - lo_t <= 1e-15 * hi_t:
            break
    data(hi_t)


def project_qoi(fx: _Fast, x, lo, hi, exclude: int = -1) -> bool:
    """Raise deltas until the QoI row holds; False if it cannot."""
    if fx.fixed:
        return fx.delivered(x) >= fx.gamma * (1 - _FEAS) - _FEAS
    for _ in range(len(fx.leaves)):
        deficit = fx.gamma - fx.delivered(x)
        if deficit <= 0.0:
            return True
        best, best_slack = None, 0.0
        for k in fx.leaves:
            idxs = [i for i in fx.dix[k] if i != exclude and x[i] < hi[i]]
            if not idxs:
                continue
            frozen = math.prod(hi[i] if i in idxs else x[i] for i in fx.dix[k])
            slack = fx.y[k] * frozen - fx.path_data(x, k)
            if slack > best_slack + 1e-15:
                best, best_slack = (k, idxs), slack
        if best is None:
            return False
        k, idxs = best
        _scale_path(fx, x, k, idxs, hi, fx.path_data(x, k) + deficit + 1e-12 * fx.gamma)
    return fx.delivered(x) >= fx.gamma * (1 - _FEAS) - _FEAS


def _repair_bits(fx: _Fast, x, lo, hi) -> bool:
    for k in fx.leaves:
        set_bits = [i for i in fx.bix[k] if x[i] > 0.5]
        if len(set_bits) <= 1:
            continue
        forced = [i for i in set_bits if lo[i] > 0.5]
        if len(forced) > 1:
            return False
        keep = forced[0] if forced else set_bits[0]     # shallowest unless forced
        for i in set_bits:
            if i != keep:
                x[i] = 0.0
    for hv, _, ks, cap in fx.caps:
        while fx.load(x, hv, ks) > cap * (1 + _FEAS) + _FEAS:
            free = [fx.bix[k][hv] for k in ks if x[fx.bix[k][hv]] > 0.5 and lo[fx.bix[k][hv]] < 0.5]
            if not free:
                return False
            x[free[-1]] = 0.0
    return True


def _descend_structured(fx: _Fast, x, lo, hi, sweeps, tol, until_stable=False):
    value = fx.energy(x)
    if fx.fixed:
        return value
    coords = [i for k in fx.leaves for i in fx.dix[k] if hi[i] - lo[i] > tol]
    sweep = 0
    while sweep < sweeps:
        sweep += 1
        improved = False
        for c in coords:
            trial = x.copy()

            def f(t):
                trial[:] = x
                trial[c] = t
                if not project_qoi(fx, trial, lo, hi, exclude=c):
                    return math.inf
                if not fx.capacity_ok(trial):
                    return math.inf
                return fx.energy(trial)

            t, ft = golden_section(f, lo[c], hi[c], tol)
            if ft < value - 1e-15 * max(1.0, abs(value)):
                f(t)
                x[:] = trial
                value = fx.energy(x)
                improved = True
        if until_stable and improved and sweep == sweeps and sweeps < _MAX_SWEEPS:
            sweeps += 1
        if not improved:
            break
    return value


def _structured(problem: Problem, point, lo, hi, sweeps, tol, until_stable):
    fx = _Fast(problem.structure)
    x = np.clip(np.asarray(point, dtype=float).copy(), lo, hi)
    for i in problem.binary_indices():
        x[i] = lo[i] if lo[i] == hi[i] else float(x[i] > 0.5)
    if not _repair_bits(fx, x, lo, hi):
        return None
    if not project_qoi(fx, x, lo, hi):
        return None
    if not fx.capacity_ok(x):
        # compression may have grown a cached copy; try dropping bits again
        if not _repair_bits(fx, x, lo, hi) or not fx.capacity_ok(x):
            return None
    _descend_structured(fx, x, lo, hi, sweeps, tol, until_stable)
    return x


def _generic(problem: Problem, point, lo, hi, sweeps, tol, until_stable):
    x = np.clip(np.asarray(point, dtype=float).copy(), lo, hi)
    bins = set(problem.binary_indices())
    for i in bins:
        x[i] = lo[i] if lo[i] == hi[i] else float(x[i] > 0.5)

    def f(z):
        try:
            if not problem.is_feasible(z):
                return math.inf
            return problem.objective_value(z)
        except ZeroDivisionError:
            return math.inf

    value = f(x)
    if math.isinf(value):
        return None
    coords = [i for i in range(problem.n) if i not in bins and hi[i] - lo[i] > tol]
    for _ in range(sweeps):
        improved = False
        for c in coords:
            trial = x.copy()

            def g(t):
                trial[c] = t
                return f(trial)

            t, ft = golden_section(g, lo[c], hi[c], tol)
            if ft < value - 1e-15 * max(1.0, abs(value)):
                x[c] = t
                value = ft
                improved = True
        if not improved:
            break
    return x


def improve(problem: Problem, point: Sequence[float], lower=None, upper=None,
            sweeps: int = SWEEPS, tol: float = TOL, until_stable: bool = False) -> Optional[np.ndarray]:
    """Feasible point near ``point`` inside ``[lower, upper]``, or None."""
    n = problem.n
    lo = np.array([v.lower for v in problem.variables]) if lower is None else np.asarray(lower, float)[:n]
    hi = np.array([v.upper for v in problem.variables]) if upper is None else np.asarray(upper, float)[:n]
    if isinstance(problem.structure, C3Structure):
        x = _structured(problem, point, lo, hi, sweeps, tol, until_stable)
    else:
        x = _generic(problem, point, lo, hi, sweeps, tol, until_stable)
    if x is None or not problem.is_feasible(x):
        return None
    return x
