"""McCormick linear relaxations of a standard form over a box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroDenominatorRange
from .expr import Rel
from .reformulate import IntervalBounds, LinearRow, StandardForm

KEEP = "keep"
RELAX = "relax"

_SENSE = {Rel.LE: -1, Rel.EQ: 0, Rel.GE: 1}


@dataclass
class LinearProgram:
    """``min c.x`` s.t. ``A x (sense) b``, ``lower <= x <= upper``.

    ``sense`` holds -1 for <=, 0 for =, +1 for >=.  Variables listed in
    ``integers`` must take integral values (all are 0/1 in this package).
    """

    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integers: tuple[int, ...] = ()

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, len(self.c))
        self.sense = np.asarray(self.sense, dtype=int)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.integers = tuple(self.integers)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_vars(self) -> int:
        return len(self.c)

    def with_bounds(self, lower, upper) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.sense, self.b, lower, upper, self.integers)

    def relaxed(self) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.sense, self.b, self.lower, self.upper, ())

    def max_violation(self, x, relative: bool = False) -> float:
        """Largest bound or row violation at ``x``.

        With ``relative`` each row's violation is divided by
        ``max(1, sum |a_ij x_j|)``, the size of the numbers that cancel in it.
        """
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(self.lower - x, initial=0.0), np.max(x - self.upper, initial=0.0)))
        if self.num_rows:
            r = self.A @ x - self.b
            viol = np.where(self.sense < 0, r, np.where(self.sense > 0, -r, np.abs(r)))
            if relative:
                viol = viol / np.maximum(1.0, np.abs(self.A) @ np.abs(x))
            worst = max(worst, float(np.max(viol)))
        return worst

    @classmethod
    def from_rows(cls, n, rows, c, lower, upper, integers=()) -> "LinearProgram":
        A = np.zeros((len(rows), n))
        sense = np.zeros(len(rows), dtype=int)
        b = np.zeros(len(rows))
        for r, row in enumerate(rows):
            for i, a in row.coefs:
                A[r, i] += a
            sense[r] = _SENSE[row.rel]
            b[r] = row.rhs
        return cls(c, A, sense, b, lower, upper, integers)


def _bilinear_rows(i, j, k, il, iu, jl, ju, name) -> list[LinearRow]:
    def row(ci, cj, rel, rhs, tag):
        coefs: dict[int, float] = {k: 1.0}
        coefs[j] = coefs.get(j, 0.0) - cj
        coefs[i] = coefs.get(i, 0.0) - ci
        return LinearRow(tuple(sorted(coefs.items())), rel, rhs, f"{name}:{tag}")

    return [
        # over-estimators
        row(ju, il, Rel.LE, -il * ju, "over1"),
        row(jl, iu, Rel.LE, -iu * jl, "over2"),
        # under-estimators
        row(jl, il, Rel.GE, -il * jl, "under1"),
        row(ju, iu, Rel.GE, -iu * ju, "under2"),
    ]


def mccormick_bt(triple, bounds: IntervalBounds) -> list[LinearRow]:
    """Envelope rows of ``w_k = w_i * w_j`` over the box."""
    i, j, k = triple
    il, iu = bounds[i]
    jl, ju = bounds[j]
    return _bilinear_rows(i, j, k, il, iu, jl, ju, f"bt({i},{j},{k})")


def mccormick_lft(triple, bounds: IntervalBounds) -> list[LinearRow]:
    """Envelope rows of ``w_k = w_i / w_j`` via ``w_i = w_k * w_j``."""
    i, j, k = triple
    jl, ju = bounds[j]
    if jl <= 0.0 <= ju:
        raise ZeroDenominatorRange(f"w{j} has range [{jl}, {ju}]")
    kl, ku = bounds[k]
    # the product now lives in w_i; factors are w_k and w_j
    return _bilinear_rows(k, j, i, kl, ku, jl, ju, f"lft({i},{j},{k})")


def build_relaxation(sf: StandardForm, box: IntervalBounds,
                     integrality: str = KEEP) -> LinearProgram:
    rows = list(sf.rows)
    for t in sf.t_bt:
        rows.extend(mccormick_bt(t, box))
    for t in sf.t_lft:
        rows.extend(mccormick_lft(t, box))
    c = np.zeros(sf.n)
    c[sf.obj_index] = 1.0
    if integrality == KEEP:
        integers = tuple(sf.binary_indices())
    elif integrality == RELAX:
        integers = ()
    else:
        raise ValueError(f"integrality must be 'keep' or 'relax', got {integrality!r}")
    return LinearProgram.from_rows(sf.n, rows, c, box.lower.copy(), box.upper.copy(), integers)
