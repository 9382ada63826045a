"""Symbolic reformulation into the bilinear / linear-fractional standard form.

The standard form minimizes a single variable ``w_obj`` subject to linear
rows, variable bounds, and two sets of defining triples::

    w_k == w_i * w_j   for (i, j, k) in t_bt
    w_k == w_i / w_j   for (i, j, k) in t_lft

Auxiliary variables are appended after the originals in creation order,
which is also a topological order of their definitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import interval as iv
from .errors import DivisionByZero, UnboundedVariable, ZeroDenominatorRange
from .expr import (Const, Expr, Problem, Rel, Var, VariableInfo,
                   VarKind)

TABLE = "table"
EXPAND = "expand"


@dataclass(frozen=True)
class LinearRow:
    """``sum(coef * w[i]) rel rhs``."""

    coefs: tuple[tuple[int, float], ...]
    rel: Rel
    rhs: float
    name: str = ""

    def value(self, w) -> float:
        return sum(c * w[i] for i, c in self.coefs)

    def residual(self, w) -> float:
        lhs = self.value(w)
        if self.rel is Rel.LE:
            return max(0.0, lhs - self.rhs)
        if self.rel is Rel.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class AuxDef:
    """How auxiliary variable ``k`` is defined.

    kind is one of ``bt`` (w_i * w_j), ``lft`` (w_i / w_j), ``row`` (the
    linear row at ``row`` solved for w_k), or ``const`` (fixed value).
    """

    kind: str
    k: int
    i: int = -1
    j: int = -1
    row: int = -1
    value: float = 0.0


@dataclass
class IntervalBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    def __len__(self):
        return len(self.lower)

    def copy(self) -> "IntervalBounds":
        return IntervalBounds(self.lower.copy(), self.upper.copy())

    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def __getitem__(self, i) -> tuple[float, float]:
        return float(self.lower[i]), float(self.upper[i])


@dataclass(frozen=True)
class StandardForm:
    variables: tuple[VariableInfo, ...]
    n_original: int
    rows: tuple[LinearRow, ...]
    obj_index: int
    t_bt: tuple[tuple[int, int, int], ...]
    t_lft: tuple[tuple[int, int, int], ...]
    defs: tuple[AuxDef, ...]
    mode: str = EXPAND

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def n_aux(self) -> int:
        return self.n - self.n_original

    @property
    def triples(self) -> list[tuple[str, int, int, int]]:
        return ([("bt", i, j, k) for i, j, k in self.t_bt]
                + [("lft", i, j, k) for i, j, k in self.t_lft])

    def bounds(self) -> IntervalBounds:
        return IntervalBounds([v.lower for v in self.variables],
                              [v.upper for v in self.variables])

    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    def original_bounds(self) -> IntervalBounds:
        vs = self.variables[:self.n_original]
        return IntervalBounds([v.lower for v in vs], [v.upper for v in vs])


class _Lin:
    """Affine form ``const + sum(terms[i] * w_i)`` with zero terms dropped."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms: dict[int, float] = {i: c for i, c in (terms or {}).items() if c != 0.0}
        self.const = float(const)

    @property
    def is_const(self) -> bool:
        return not self.terms

    @property
    def single_var(self) -> Optional[int]:
        if self.const == 0.0 and len(self.terms) == 1:
            (i, c), = self.terms.items()
            if c == 1.0:
                return i
        return None

    def scaled(self, c: float) -> "_Lin":
        return _Lin({i: a * c for i, a in self.terms.items()}, self.const * c)

    def plus(self, other: "_Lin", sign: float = 1.0) -> "_Lin":
        terms = dict(self.terms)
        for i, c in other.terms.items():
            terms[i] = terms.get(i, 0.0) + sign * c
        return _Lin(terms, self.const + sign * other.const)

    def key(self):
        return (tuple(sorted(self.terms.items())), self.const)


class _Builder:
    def __init__(self, problem: Problem, mode: str):
        if mode not in (TABLE, EXPAND):
            raise ValueError(f"unknown reformulation mode {mode!r}")
        self.mode = mode
        self.vars: list[VariableInfo] = list(problem.variables)
        self.n_original = len(self.vars)
        self.rows: list[LinearRow] = []
        self.defs: list[AuxDef] = []
        self.t_bt: list[tuple[int, int, int]] = []
        self.t_lft: list[tuple[int, int, int]] = []
        self._triple_cache: dict[tuple, int] = {}
        self._row_cache: dict[tuple, int] = {}
        self._const_cache: dict[float, int] = {}
        self._memo: dict[Expr, _Lin] = {}

    # -- variable creation -------------------------------------------------
    def _new_aux(self, name: str, lo: float, hi: float) -> int:
        k = len(self.vars)
        self.vars.append(VariableInfo(name, VarKind.CONTINUOUS, lo, hi))
        return k

    def _bounds(self, i: int) -> iv.Interval:
        v = self.vars[i]
        return v.lower, v.upper

    def _name(self, i: int) -> str:
        return self.vars[i].name

    def const_var(self, value: float) -> int:
        if value in self._const_cache:
            return self._const_cache[value]
        k = self._new_aux(f"{value:g}", value, value)
        row = len(self.rows)
        self.rows.append(LinearRow(((k, 1.0),), Rel.EQ, value, f"const {value:g}"))
        self.defs.append(AuxDef("const", k, row=row, value=value))
        self._const_cache[value] = k
        return k

    def row_var(self, lin: _Lin, name: Optional[str] = None, cache: bool = True) -> int:
        key = lin.key()
        if cache and key in self._row_cache:
            return self._row_cache[key]
        lo = [v.lower for v in self.vars]
        hi = [v.upper for v in self.vars]
        rng = iv.linear(lin.terms.items(), lo, hi, lin.const)
        k = self._new_aux(name or f"lin{len(self.vars)}", *rng)
        coefs = tuple(sorted(lin.terms.items())) + ((k, -1.0),)
        row = len(self.rows)
        self.rows.append(LinearRow(coefs, Rel.EQ, -lin.const, f"def {self._name(k)}"))
        self.defs.append(AuxDef("row", k, row=row))
        if cache:
            self._row_cache[key] = k
        return k

    def as_var(self, lin: _Lin) -> int:
        i = lin.single_var
        if i is not None:
            return i
        if lin.is_const:
            return self.const_var(lin.const)
        return self.row_var(lin)

    def bt(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        key = ("*", i, j)
        if key in self._triple_cache:
            return self._triple_cache[key]
        rng = iv.mul(self._bounds(i), self._bounds(j))
        k = self._new_aux(f"({self._name(i)}*{self._name(j)})", *rng)
        self.t_bt.append((i, j, k))
        self.defs.append(AuxDef("bt", k, i, j))
        self._triple_cache[key] = k
        return k

    def lft(self, i: int, j: int) -> int:
        key = ("/", i, j)
        if key in self._triple_cache:
            return self._triple_cache[key]
        rng = iv.div(self._bounds(i), self._bounds(j))
        k = self._new_aux(f"({self._name(i)}/{self._name(j)})", *rng)
        self.t_lft.append((i, j, k))
        self.defs.append(AuxDef("lft", k, i, j))
        self._triple_cache[key] = k
        return k

    # -- tree lowering -----------------------------------------------------
    def lower(self, e: Expr) -> _Lin:
        if isinstance(e, Const):
            return _Lin(const=e.value)
        if isinstance(e, Var):
            return _Lin({e.index: 1.0})
        hit = self._memo.get(e)
        if hit is not None:
            return hit
        a = self.lower(e.left)
        b = self.lower(e.right)
        if e.op == "+":
            out = a.plus(b)
        elif e.op == "-":
            out = a.plus(b, -1.0)
        elif e.op == "*":
            out = self._mul(a, b)
        else:
            out = self._div(a, b)
        self._memo[e] = out
        return out

    def _mul(self, a: _Lin, b: _Lin) -> _Lin:
        if a.is_const:
            return b.scaled(a.const)
        if b.is_const:
            return a.scaled(b.const)
        if self.mode == TABLE:
            return _Lin({self.bt(self.as_var(a), self.as_var(b)): 1.0})
        out = _Lin(const=a.const * b.const)
        for i, ci in a.terms.items():
            for j, cj in b.terms.items():
                out = out.plus(_Lin({self.bt(i, j): ci * cj}))
        if a.const:
            out = out.plus(_Lin(b.terms).scaled(a.const))
        if b.const:
            out = out.plus(_Lin(a.terms).scaled(b.const))
        return out

    def _div(self, a: _Lin, b: _Lin) -> _Lin:
        if b.is_const:
            if b.const == 0.0:
                raise DivisionByZero("division by the constant 0")
            return a.scaled(1.0 / b.const)
        d = self.as_var(b)
        if iv.contains_zero(self._bounds(d)):
            raise ZeroDenominatorRange(
                f"denominator {self._name(d)} has range {self._bounds(d)}")
        if a.is_const and a.const == 0.0:
            return _Lin()
        if self.mode == TABLE:
            return _Lin({self.lft(self.as_var(a), d): 1.0})
        out = _Lin()
        for i, ci in a.terms.items():
            out = out.plus(_Lin({self.lft(i, d): ci}))
        if a.const:
            out = out.plus(_Lin({self.lft(self.const_var(1.0), d): a.const}))
        return out


def reformulate(problem: Problem, mode: str = EXPAND) -> StandardForm:
    """Lift ``problem`` into standard form.

    ``mode="table"`` applies the classic C/V/X rule table: a non-variable
    operand of ``*`` or ``/`` is first captured by a new linear row.
    ``mode="expand"`` distributes products and quotients over affine
    operands, so every triple relates two variables directly.
    """
    for v in problem.variables:
        if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
            raise UnboundedVariable(f"{v.name} has bounds [{v.lower}, {v.upper}]")
    b = _Builder(problem, mode)
    for c in problem.constraints:
        lin = b.lower(c.expr)
        coefs = tuple(sorted(lin.terms.items()))
        b.rows.append(LinearRow(coefs, c.rel, c.rhs - lin.const, c.name))
    obj = b.lower(problem.objective)
    obj_index = b.row_var(obj, name="obj", cache=False)
    return StandardForm(
        variables=tuple(b.vars),
        n_original=b.n_original,
        rows=tuple(b.rows),
        obj_index=obj_index,
        t_bt=tuple(b.t_bt),
        t_lft=tuple(b.t_lft),
        defs=tuple(b.defs),
        mode=mode,
    )


def _row_definition(row: LinearRow, k: int):
    """Terms of ``w_k = sum(a_i w_i) + c`` from a defining row."""
    a_k = dict(row.coefs)[k]
    terms = [(i, -c / a_k) for i, c in row.coefs if i != k]
    return terms, row.rhs / a_k


def derive_bounds(sf: StandardForm, box: Optional[IntervalBounds] = None) -> IntervalBounds:
    """Interval bounds for every variable given bounds on the originals.

    ``box`` may cover only the originals or all variables; auxiliary
    entries of a full box are ignored and recomputed from the originals.
    """
    n0 = sf.n_original
    lo = np.empty(sf.n)
    hi = np.empty(sf.n)
    if box is None:
        box = sf.original_bounds()
    lo[:n0] = box.lower[:n0]
    hi[:n0] = box.upper[:n0]
    for d in sf.defs:
        k = d.k
        if d.kind == "bt":
            lo[k], hi[k] = iv.mul((lo[d.i], hi[d.i]), (lo[d.j], hi[d.j]))
        elif d.kind == "lft":
            lo[k], hi[k] = iv.div((lo[d.i], hi[d.i]), (lo[d.j], hi[d.j]))
        elif d.kind == "const":
            lo[k] = hi[k] = d.value
        else:
            terms, c = _row_definition(sf.rows[d.row], k)
            lo[k], hi[k] = iv.linear(terms, lo, hi, c)
    return IntervalBounds(lo, hi)


def lift_point(sf: StandardForm, original_point: Sequence[float]) -> np.ndarray:
    """Extend an original point with the values its auxiliaries take."""
    w = np.zeros(sf.n)
    w[:sf.n_original] = np.asarray(original_point, dtype=float)[:sf.n_original]
    for d in sf.defs:
        k = d.k
        if d.kind == "bt":
            w[k] = w[d.i] * w[d.j]
        elif d.kind == "lft":
            if w[d.j] == 0.0:
                raise DivisionByZero(f"w{d.j} is zero while lifting w{k}")
            w[k] = w[d.i] / w[d.j]
        elif d.kind == "const":
            w[k] = d.value
        else:
            terms, c = _row_definition(sf.rows[d.row], k)
            w[k] = c + sum(a * w[i] for i, a in terms)
    return w


def triple_error(kind: str, i: int, j: int, k: int, w) -> float:
    """Gap between an auxiliary's value and the term it stands for."""
    if kind == "bt":
        return abs(w[k] - w[i] * w[j])
    if w[j] == 0.0:
        return math.inf
    return abs(w[k] - w[i] / w[j])


def original_dependencies(sf: StandardForm) -> list[frozenset[int]]:
    """For each variable, the original variables its definition reaches."""
    deps: list[frozenset[int]] = [frozenset((i,)) for i in range(sf.n_original)]
    deps.extend(frozenset() for _ in range(sf.n_aux))
    for d in sf.defs:
        if d.kind in ("bt", "lft"):
            deps[d.k] = deps[d.i] | deps[d.j]
        elif d.kind == "row":
            s: frozenset[int] = frozenset()
            for i, _ in sf.rows[d.row].coefs:
                if i != d.k:
                    s = s | deps[i]
            deps[d.k] = s
    return deps


def dump(sf: StandardForm) -> str:
    """Plain-text listing of a standard form (format in README)."""
    lines = [
        f"# standard form ({sf.mode}): {sf.n} variables ({sf.n_original} original, "
        f"{sf.n_aux} auxiliary), {len(sf.rows)} rows, {len(sf.t_bt)} bt, {len(sf.t_lft)} lft",
    ]
    for i, v in enumerate(sf.variables):
        role = "orig" if i < sf.n_original else "aux"
        lines.append(f"var {i} {v.name} {v.kind.value} {role} {v.lower:.10g} {v.upper:.10g}")
    lines.append(f"obj {sf.obj_index}")
    for r, row in enumerate(sf.rows):
        terms = " ".join(f"{c:+.10g}*w{i}" for i, c in row.coefs)
        lines.append(f"row {r} {row.rel.value} {row.rhs:.10g} : {terms}")
    for i, j, k in sf.t_bt:
        lines.append(f"bt {i} {j} {k}")
    for i, j, k in sf.t_lft:
        lines.append(f"lft {i} {j} {k}")
    bound = sf.n_original ** 2
    ok = "ok" if sf.n_aux <= bound else "violated"
    lines.append(f"aux_count {sf.n_aux} bound {bound} {ok}")
    return "\n".join(lines) + "\n"
