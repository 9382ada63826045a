"""Factorable expressions over the four arithmetic operators.

Expressions are immutable binary trees.  Python operators build them, so
``2 * x + y / z`` yields a tree when ``x``, ``y`` and ``z`` are :class:`Var`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence, Union

from .errors import DivisionByZero, UnboundVariable

Number = Union[int, float]

OPS = ("+", "-", "*", "/")


class Expr:
    """Base class; supplies the arithmetic operators."""

    __slots__ = ()

    def __add__(self, other): return BinOp("+", self, as_expr(other))
    def __radd__(self, other): return BinOp("+", as_expr(other), self)
    def __sub__(self, other): return BinOp("-", self, as_expr(other))
    def __rsub__(self, other): return BinOp("-", as_expr(other), self)
    def __mul__(self, other): return BinOp("*", self, as_expr(other))
    def __rmul__(self, other): return BinOp("*", as_expr(other), self)
    def __truediv__(self, other): return BinOp("/", self, as_expr(other))
    def __rtruediv__(self, other): return BinOp("/", as_expr(other), self)
    def __neg__(self): return BinOp("-", Const(0.0), self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self):
        return f"{self.value:g}"


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def __repr__(self):
        return f"w{self.index}"


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    # trees share subtrees freely, so hashing every call would be quadratic
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unsupported operator {self.op!r}")
        object.__setattr__(self, "_hash", hash((self.op, self.left, self.right)))

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"({self.left!r} {self.op} {self.right!r})"


def as_expr(x: Any) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def sum_of(terms: Iterable[Any]) -> Expr:
    """Left-associated sum; the empty sum is ``Const(0)``."""
    out = None
    for t in terms:
        t = as_expr(t)
        out = t if out is None else out + t
    return Const(0.0) if out is None else out


def product_of(factors: Iterable[Any]) -> Expr:
    """Right-nested product ``f0 * (f1 * (...))``; empty product is 1."""
    fs = [as_expr(f) for f in factors]
    if not fs:
        return Const(1.0)
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = f * out
    return out


class NodeClass(enum.Enum):
    C = "C"
    V = "V"
    X = "X"


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class VariableInfo:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"{self.name}: lower {self.lower} > upper {self.upper}")
        if self.kind is VarKind.BINARY and not (0.0 <= self.lower and self.upper <= 1.0):
            raise ValueError(f"{self.name}: binary bounds must lie in [0, 1]")

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


class Rel(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="

    def holds(self, lhs: float, rhs: float, tol: float = 0.0) -> bool:
        if self is Rel.LE:
            return lhs <= rhs + tol
        if self is Rel.GE:
            return lhs >= rhs - tol
        return abs(lhs - rhs) <= tol


@dataclass(frozen=True)
class Constraint:
    expr: Expr
    rel: Rel
    rhs: float
    name: str = ""

    def violation(self, point) -> float:
        lhs = evaluate(self.expr, point)
        if self.rel is Rel.LE:
            return max(0.0, lhs - self.rhs)
        if self.rel is Rel.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class Problem:
    """Minimize ``objective`` over ``variables`` subject to ``constraints``.

    ``structure`` carries optional model metadata (see
    :class:`c3sbb.c3model.C3Structure`) that the local search exploits.
    """

    variables: tuple[VariableInfo, ...]
    objective: Expr
    constraints: tuple[Constraint, ...] = ()
    structure: Any = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = len(self.variables)
        for e in [self.objective] + [c.expr for c in self.constraints]:
            for i in variables_in(e):
                if not 0 <= i < n:
                    raise UnboundVariable(f"variable index {i} out of range (n={n})")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def num_continuous(self) -> int:
        return sum(1 for v in self.variables if not v.is_binary)

    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    def objective_value(self, point) -> float:
        return evaluate(self.objective, point)

    def max_violation(self, point) -> float:
        worst = 0.0
        for c in self.constraints:
            worst = max(worst, c.violation(point))
        for i, v in enumerate(self.variables):
            x = point[i]
            worst = max(worst, v.lower - x, x - v.upper)
            if v.is_binary:
                worst = max(worst, min(abs(x), abs(x - 1.0)))
        return worst

    def is_feasible(self, point, tol: float = 1e-6) -> bool:
        return self.max_violation(point) <= tol


def _lookup(point, i: int) -> float:
    try:
        return float(point[i])
    except (KeyError, IndexError):
        raise UnboundVariable(f"variable w{i} is not assigned") from None


def evaluate(expr: Expr, point: Mapping[int, float] | Sequence[float]) -> float:
    """Arithmetic value of ``expr`` with variables taken from ``point``."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return _lookup(point, expr.index)
    a = evaluate(expr.left, point)
    b = evaluate(expr.right, point)
    op = expr.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0.0:
        raise DivisionByZero(f"division by zero in {expr!r}")
    return a / b


def fold_constants(expr: Expr) -> Expr:
    """Collapse every operator whose operands are both constants."""
    if not isinstance(expr, BinOp):
        return expr
    left = fold_constants(expr.left)
    right = fold_constants(expr.right)
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(evaluate(BinOp(expr.op, left, right), ()))
    if left is expr.left and right is expr.right:
        return expr
    return BinOp(expr.op, left, right)


def classify(expr: Expr) -> NodeClass:
    if isinstance(expr, Var):
        return NodeClass.V
    if isinstance(fold_constants(expr), Const):
        return NodeClass.C
    return NodeClass.X


def variables_in(expr: Expr) -> set[int]:
    out: set[int] = set()
    stack = [expr]
    seen: set[int] = set()
    while stack:
        e = stack.pop()
        if isinstance(e, Var):
            out.add(e.index)
        elif isinstance(e, BinOp):
            if id(e) in seen:
                continue
            seen.add(id(e))
            stack.append(e.left)
            stack.append(e.right)
    return out


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal of every node."""
    stack = [expr]
    while stack:
        e = stack.pop()
        yield e
        if isinstance(e, BinOp):
            stack.append(e.right)
            stack.append(e.left)


def depth(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return 1 + max(depth(expr.left), depth(expr.right))
    return 0


def is_finite_interval(lo: float, hi: float) -> bool:
    return math.isfinite(lo) and math.isfinite(hi)
