"""Energy model for communication, computation and caching in a tree network.

Leaves generate ``y_k`` bits per period.  Every node on the path from a
leaf to the sink may compress the data by a reduction rate ``delta`` and
one node on the path may cache it.  The sink serves ``R_k`` requests per
period for each leaf's data; the first request pulls the data up the
tree and later ones are answered by the cached copy if there is one.

Path levels run from 0 (the sink) to ``h(k)`` (the leaf itself).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .errors import DivisionByZero, InfeasibleDecision, InfeasibleGamma, InvalidTree
from .expr import (Const, Constraint, Expr, Problem, Rel, Var, VariableInfo,
                   VarKind, as_expr, product_of, sum_of)

# simulation defaults
Y_BITS = 1000.0
REQUESTS = 100
W_CA = 1.88e-6
PERIOD = 10.0
EPS_R = 50e-9
EPS_T = 200e-9
EPS_C = 80e-9
DELTA_FLOOR = 1e-4


@dataclass(frozen=True)
class NodeParams:
    eps_r: float = EPS_R
    eps_t: float = EPS_T
    eps_c: float = EPS_C
    # None means "room for everything the network generates"
    cache_capacity: Optional[float] = None

    def __post_init__(self):
        for name in ("eps_r", "eps_t", "eps_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.cache_capacity is not None and self.cache_capacity < 0:
            raise ValueError("cache_capacity must be nonnegative")


@dataclass
class NetworkSpec:
    nodes: list[NodeParams]
    parent: list[Optional[int]]
    y: dict[int, float]
    requests: dict[int, int]
    gamma: float
    w_ca: float = W_CA
    period: float = PERIOD
    delta_floor: float = DELTA_FLOOR

    def __post_init__(self):
        self.nodes = list(self.nodes)
        self.parent = list(self.parent)
        self.validate()

    def validate(self) -> None:
        n = len(self.nodes)
        if len(self.parent) != n or n == 0:
            raise InvalidTree("parent list must have one entry per node")
        roots = [v for v, p in enumerate(self.parent) if p is None]
        if len(roots) != 1:
            raise InvalidTree(f"expected exactly one sink, found {len(roots)}")
        for v, p in enumerate(self.parent):
            if p is not None and not 0 <= p < n:
                raise InvalidTree(f"node {v} has unknown parent {p}")
        for v in range(n):
            seen = set()
            u: Optional[int] = v
            while u is not None:
                if u in seen:
                    raise InvalidTree(f"cycle through node {v}")
                seen.add(u)
                u = self.parent[u]
        leaves = self.leaves
        if n > 1 and self.sink in leaves:
            raise InvalidTree("sink cannot be a leaf")
        for k in leaves:
            if self.y.get(k, 0) <= 0:
                raise InvalidTree(f"leaf {k} needs y > 0")
            if self.requests.get(k, 0) < 1:
                raise InvalidTree(f"leaf {k} needs at least one request")
        if not 0 < self.delta_floor <= 1:
            raise ValueError("delta_floor must lie in (0, 1]")

    @property
    def sink(self) -> int:
        return self.parent.index(None)

    @property
    def leaves(self) -> list[int]:
        has_child = {p for p in self.parent if p is not None}
        return [v for v in range(len(self.nodes)) if v not in has_child]

    def depth(self, v: int) -> int:
        d = 0
        while self.parent[v] is not None:
            v = self.parent[v]
            d += 1
        return d

    def path(self, k: int) -> list[int]:
        """Nodes from the sink (level 0) down to ``k`` (level h(k))."""
        out = [k]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out[::-1]

    def descendant_leaves(self, v: int) -> list[int]:
        return [k for k in self.leaves if v in self.path(k)]

    @property
    def total_data(self) -> float:
        return float(sum(self.y[k] for k in self.leaves))

    def capacity(self, v: int) -> float:
        cap = self.nodes[v].cache_capacity
        return self.total_data if cap is None else float(cap)

    def with_gamma(self, gamma: float) -> "NetworkSpec":
        return replace(self, gamma=gamma, y=dict(self.y), requests=dict(self.requests))

    def with_requests(self, r: int) -> "NetworkSpec":
        return replace(self, y=dict(self.y), requests={k: r for k in self.requests})

    def with_capacity(self, cap: Optional[float]) -> "NetworkSpec":
        nodes = [replace(p, cache_capacity=cap) for p in self.nodes]
        return replace(self, nodes=nodes, y=dict(self.y), requests=dict(self.requests))


def tree(parent: Sequence[Optional[int]], gamma: float, y: float = Y_BITS,
         requests: int = REQUESTS, node: NodeParams = NodeParams(), **kw) -> NetworkSpec:
    """Homogeneous network from a parent list."""
    has_child = {p for p in parent if p is not None}
    leaves = [v for v in range(len(parent)) if v not in has_child]
    return NetworkSpec(
        nodes=[node] * len(parent),
        parent=list(parent),
        y={k: float(y) for k in leaves},
        requests={k: int(requests) for k in leaves},
        gamma=gamma,
        **kw,
    )


def two_node(gamma: float = 1000.0, **kw) -> NetworkSpec:
    return tree([None, 0], gamma, **kw)


def three_node(gamma: float = 1000.0, **kw) -> NetworkSpec:
    return tree([None, 0, 0], gamma, **kw)


def four_node(gamma: float = 1000.0, **kw) -> NetworkSpec:
    return tree([None, 0, 1, 1], gamma, **kw)


def seven_node(gamma: float = 4000.0, **kw) -> NetworkSpec:
    return tree([None, 0, 0, 1, 1, 2, 2], gamma, **kw)


TOPOLOGIES = {
    "two_node": two_node,
    "three_node": three_node,
    "four_node": four_node,
    "seven_node": seven_node,
}


@dataclass
class DecisionVector:
    """Reduction rates and cache bits keyed by ``(leaf, level)``."""

    delta: dict[tuple[int, int], float]
    cache: dict[tuple[int, int], int]

    def cached_level(self, k: int) -> int:
        for (kk, i), b in sorted(self.cache.items()):
            if kk == k and b:
                return i
        return -1


class Layout:
    """Variable numbering: every delta of every leaf, then every cache bit."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.leaves = spec.leaves
        self.paths = {k: spec.path(k) for k in self.leaves}
        self.delta_index: dict[tuple[int, int], int] = {}
        self.cache_index: dict[tuple[int, int], int] = {}
        for k in self.leaves:
            for i in range(len(self.paths[k])):
                self.delta_index[(k, i)] = len(self.delta_index)
        offset = len(self.delta_index)
        for k in self.leaves:
            for i in range(len(self.paths[k])):
                self.cache_index[(k, i)] = offset + len(self.cache_index)

    @property
    def n(self) -> int:
        return len(self.delta_index) + len(self.cache_index)

    def height(self, k: int) -> int:
        return len(self.paths[k]) - 1

    def to_point(self, d: DecisionVector) -> list[float]:
        x = [0.0] * self.n
        for key, idx in self.delta_index.items():
            x[idx] = float(d.delta[key])
        for key, idx in self.cache_index.items():
            x[idx] = float(d.cache.get(key, 0))
        return x

    def from_point(self, x) -> DecisionVector:
        return DecisionVector(
            delta={key: float(x[i]) for key, i in self.delta_index.items()},
            cache={key: int(round(float(x[i]))) for key, i in self.cache_index.items()},
        )


@dataclass
class C3Structure:
    """Model metadata attached to a built :class:`Problem`."""

    spec: NetworkSpec
    layout: Layout
    fixed_delta: bool = False
    variant: str = "c3"


def per_bit_cost(node: NodeParams, delta) -> Expr:
    """Reception + transmission + compression cost per input bit."""
    d = as_expr(delta)
    return node.eps_r + node.eps_t * d + node.eps_c * (1.0 / d - 1.0)


def per_bit_value(node: NodeParams, delta: float) -> float:
    return node.eps_r + node.eps_t * delta + node.eps_c * (1.0 / delta - 1.0)


def _delta_exprs(layout: Layout, k: int, fixed: bool) -> list[Expr]:
    h = layout.height(k)
    if fixed:
        return [Const(1.0)] * (h + 1)
    return [Var(layout.delta_index[(k, i)]) for i in range(h + 1)]


def _suffix_product(deltas: list[Expr], start: int) -> Expr:
    """Product of deltas from level ``start`` down to the leaf."""
    return product_of(deltas[start:])


def build_ec(spec: NetworkSpec, k: int, layout: Optional[Layout] = None,
             fixed_delta: bool = False) -> Expr:
    """One-time cost of pulling leaf ``k``'s data up to the sink."""
    layout = layout or Layout(spec)
    deltas = _delta_exprs(layout, k, fixed_delta)
    path = layout.paths[k]
    y = spec.y[k]
    terms = []
    for i in range(len(path)):
        f = per_bit_cost(spec.nodes[path[i]], deltas[i])
        below = _suffix_product(deltas, i + 1)
        terms.append(y * f if i == len(path) - 1 else y * (f * below))
    return sum_of(terms)


def build_er(spec: NetworkSpec, k: int, layout: Optional[Layout] = None,
             fixed_delta: bool = False) -> Expr:
    """Cost of answering the remaining ``R_k - 1`` requests.

    The cached-copy term is written as ``y * P * b * (w_ca T + (R-1) eps_T)``
    so that ``R_k = 1`` carries only the caching cost.
    """
    layout = layout or Layout(spec)
    deltas = _delta_exprs(layout, k, fixed_delta)
    path = layout.paths[k]
    h = len(path) - 1
    y = spec.y[k]
    r1 = spec.requests[k] - 1
    eps_t_leaf = spec.nodes[k].eps_t
    bits = [Var(layout.cache_index[(k, i)]) for i in range(h + 1)]
    terms = []
    for i in range(h + 1):
        if r1 > 0:
            f = per_bit_cost(spec.nodes[path[i]], deltas[i])
            moved = f if i == h else f * _suffix_product(deltas, i + 1)
            gate = 1.0 - sum_of(bits[:i + 1])
            terms.append((y * r1) * (moved * gate))
        serve = y * (spec.w_ca * spec.period + r1 * eps_t_leaf)
        terms.append(serve * (bits[i] * _suffix_product(deltas, i)))
    return sum_of(terms)


def _variables(spec: NetworkSpec, layout: Layout, fixed_delta: bool) -> list[VariableInfo]:
    vs: list[VariableInfo] = [None] * layout.n  # type: ignore[list-item]
    lo = 1.0 if fixed_delta else spec.delta_floor
    for (k, i), idx in layout.delta_index.items():
        vs[idx] = VariableInfo(f"delta[{k},{i}]", VarKind.CONTINUOUS, lo, 1.0)
    for (k, i), idx in layout.cache_index.items():
        # even fully compressed data must fit, or the bit can never be set
        smallest = spec.y[k] * lo ** (layout.height(k) - i + 1)
        up = 1.0 if smallest <= spec.capacity(layout.paths[k][i]) else 0.0
        vs[idx] = VariableInfo(f"b[{k},{i}]", VarKind.BINARY, 0.0, up)
    return vs


def _build(spec: NetworkSpec, fixed_delta: bool, variant: str, check_gamma: bool) -> Problem:
    spec.validate()
    if check_gamma and spec.gamma > spec.total_data:
        raise InfeasibleGamma(f"gamma={spec.gamma} exceeds total data {spec.total_data}")
    layout = Layout(spec)
    objective = sum_of(build_ec(spec, k, layout, fixed_delta) + build_er(spec, k, layout, fixed_delta)
                       for k in layout.leaves)
    cons: list[Constraint] = []
    delivered = sum_of(spec.y[k] * _suffix_product(_delta_exprs(layout, k, fixed_delta), 0)
                       for k in layout.leaves)
    cons.append(Constraint(delivered, Rel.GE, float(spec.gamma), "qoi"))
    for v in range(len(spec.nodes)):
        hv = spec.depth(v)
        terms = []
        for k in spec.descendant_leaves(v):
            deltas = _delta_exprs(layout, k, fixed_delta)
            bit = Var(layout.cache_index[(k, hv)])
            terms.append(spec.y[k] * (bit * _suffix_product(deltas, hv)))
        cons.append(Constraint(sum_of(terms), Rel.LE, spec.capacity(v), f"cap[{v}]"))
    for k in layout.leaves:
        bits = [Var(layout.cache_index[(k, i)]) for i in range(layout.height(k) + 1)]
        cons.append(Constraint(sum_of(bits), Rel.LE, 1.0, f"once[{k}]"))
    return Problem(_variables(spec, layout, fixed_delta), objective, cons,
                   structure=C3Structure(spec, layout, fixed_delta, variant))


def build_problem(spec: NetworkSpec, check_gamma: bool = True) -> Problem:
    """The joint compression/caching problem for ``spec``."""
    return _build(spec, False, "c3", check_gamma)


def build_c2o(spec: NetworkSpec, check_gamma: bool = True) -> Problem:
    """Communication + computation only: every cache has zero capacity."""
    return _build(spec.with_capacity(0.0), False, "c2o", check_gamma)


def build_c2a(spec: NetworkSpec, check_gamma: bool = True) -> Problem:
    """Communication + caching only: no compression, all data delivered."""
    return _build(spec.with_gamma(spec.total_data), True, "c2a", check_gamma)


BUILDERS = {"c3": build_problem, "c2o": build_c2o, "c2a": build_c2a}


# -- direct numeric evaluation ------------------------------------------------

def leaf_energy(spec: NetworkSpec, k: int, deltas: Sequence[float], bits: Sequence[int]) -> float:
    """``E^C_k + E^R_k`` for one leaf given its path's deltas and cache bits."""
    path = spec.path(k)
    h = len(path) - 1
    y = spec.y[k]
    r1 = spec.requests[k] - 1
    serve = y * (spec.w_ca * spec.period + r1 * spec.nodes[k].eps_t)
    suffix = [1.0] * (h + 2)
    for i in range(h, -1, -1):
        suffix[i] = deltas[i] * suffix[i + 1]
    total = 0.0
    cached_above = 0
    for i in range(h + 1):
        moved = per_bit_value(spec.nodes[path[i]], deltas[i]) * suffix[i + 1]
        cached_above += bits[i]
        total += y * moved
        total += y * r1 * moved * (1 - cached_above)
        total += serve * bits[i] * suffix[i]
    return total


def energy(spec: NetworkSpec, decision: DecisionVector) -> float:
    """Total energy without feasibility checks."""
    total = 0.0
    for k in spec.leaves:
        h = spec.depth(k)
        total += leaf_energy(spec, k, [decision.delta[(k, i)] for i in range(h + 1)],
                             [decision.cache.get((k, i), 0) for i in range(h + 1)])
    return total


def delivered(spec: NetworkSpec, decision: DecisionVector) -> float:
    return sum(spec.y[k] * math.prod(decision.delta[(k, i)] for i in range(spec.depth(k) + 1))
               for k in spec.leaves)


def cache_load(spec: NetworkSpec, decision: DecisionVector, v: int) -> float:
    hv = spec.depth(v)
    load = 0.0
    for k in spec.descendant_leaves(v):
        if decision.cache.get((k, hv), 0):
            load += spec.y[k] * math.prod(decision.delta[(k, i)] for i in range(hv, spec.depth(k) + 1))
    return load


def check_decision(spec: NetworkSpec, decision: DecisionVector, tol: float = 1e-9) -> None:
    for (k, i), d in decision.delta.items():
        if not spec.delta_floor - tol <= d <= 1.0 + tol:
            raise InfeasibleDecision("delta bounds", f"delta[{k},{i}]={d}")
    for (k, i), b in decision.cache.items():
        if b not in (0, 1):
            raise InfeasibleDecision("binary cache bits", f"b[{k},{i}]={b}")
    for k in spec.leaves:
        if sum(decision.cache.get((k, i), 0) for i in range(spec.depth(k) + 1)) > 1:
            raise InfeasibleDecision(f"once[{k}]", "more than one cached copy")
    for v in range(len(spec.nodes)):
        load = cache_load(spec, decision, v)
        if load > spec.capacity(v) * (1 + tol) + tol:
            raise InfeasibleDecision(f"cap[{v}]", f"load {load:g} > capacity {spec.capacity(v):g}")


def evaluate_total(spec: NetworkSpec, decision: DecisionVector) -> float:
    """Total energy of a decision; raises :class:`InfeasibleDecision` if invalid."""
    check_decision(spec, decision)
    return energy(spec, decision)


def efficiency(e_c2: float, e_c3: float) -> float:
    """Percent energy saved by the joint optimum over a two-way one."""
    if e_c2 == 0:
        raise DivisionByZero("efficiency undefined for zero C2 energy")
    return (e_c2 - e_c3) / e_c2 * 100.0
