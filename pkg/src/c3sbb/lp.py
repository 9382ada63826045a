"""Dense bounded-variable primal simplex and a 0/1 branch-and-bound on top.

Bounds are handled natively: a nonbasic variable sits at its lower or
upper bound and may flip between them without a basis change.  Phase one
minimizes the sum of artificials; phase two the true objective.  Pricing
is Dantzig's rule, falling back to Bland's rule after a run of degenerate
pivots, so identical inputs always follow the same pivot path.
"""
from __future__ import annotations

import enum
import heapq
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .relax import LinearProgram

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
INT_TOL = 1e-6
_PIV_TOL = 1e-7
_ZERO_TOL = 1e-12
_DJ_TOL = 1e-9
_DEGENERATE_RUN = 30
_REFACTOR_EVERY = 50
_HARRIS = 1e-9
_CLEANUP_ROUNDS = 4


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpSolution:
    status: Status
    point: np.ndarray | None = None
    objective: float = math.inf
    iterations: int = 0
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Working state of one simplex run (rows already scaled)."""

    def __init__(self, A, b, lower, upper, n_struct, logical):
        self.A = A                      # m x N, includes slacks and artificials
        self.b = b
        self.lower = lower
        self.upper = upper
        self.n_struct = n_struct
        self.logical = logical          # per row, a column that is +-1 there and 0 elsewhere
        self.m, self.N = A.shape
        self.iterations = 0
        self.repairs = 0

    def start(self, basis, x):
        self.basis = np.array(basis, dtype=int)
        self.x = x
        self.refactor()

    def refactor(self):
        for attempt in range(2):
            B = self.A[:, self.basis]
            try:
                self.T = np.linalg.solve(B, self.A)
                break
            except np.linalg.LinAlgError as exc:
                if attempt or not self._repair(B):
                    raise NumericalFailure("singular basis during refactorization") from exc
        nonbasic = np.ones(self.N, dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(B, rhs)

    def _basic_mask(self):
        mask = np.zeros(self.N, dtype=bool)
        mask[self.basis] = True
        return mask

    def _repair(self, B) -> bool:
        """Swap dependent basic columns for logicals of rows left without a pivot.

        Elimination with partial pivoting marks a column dependent when
        nothing usable is left of it.  The independent columns restricted
        to their pivot rows form a nonsingular block, and logicals of the
        other rows complete it.  Evicted columns go to their nearer bound,
        which may leave basics infeasible for ``restore`` to fix.
        """
        U = B.astype(float).copy()
        m = self.m
        free_rows = np.ones(m, dtype=bool)
        dependent = []
        for c in range(m):
            col = U[:, c]
            cand = np.where(free_rows, np.abs(col), -1.0)
            p = int(np.argmax(cand))
            if cand[p] <= 1e-11 * max(1.0, float(np.abs(B[:, c]).max())):
                dependent.append(c)
                continue
            free_rows[p] = False
            f = np.where(free_rows, col / col[p], 0.0)
            U[free_rows] -= np.outer(f[free_rows], U[p])
        rows = np.flatnonzero(free_rows)
        if not dependent or len(rows) != len(dependent):
            return False
        for c, r in zip(dependent, rows):
            j = int(self.basis[c])
            lo, hi = self.lower[j], self.upper[j]
            self.x[j] = lo if abs(self.x[j] - lo) <= abs(hi - self.x[j]) else hi
            self.basis[c] = self.logical[r]
        self.repairs += 1
        return True

    def _entering(self, d, is_basic, rejected, bland):
        free = (~is_basic) & (self.upper > self.lower) & ~rejected
        at_lower = self.x <= self.lower
        cand_up = free & at_lower & (d < -_DJ_TOL)
        cand = cand_up | (free & ~at_lower & (d > _DJ_TOL))
        if not cand.any():
            return -1, 0.0
        if bland:
            j = int(np.flatnonzero(cand)[0])
        else:
            j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))   # Dantzig, lowest index on ties
        return j, (1.0 if cand_up[j] else -1.0)

    def _ratio(self, j, alpha, room, bland, force=False):
        """Leaving row and step, ``(-1, t)`` for a bound flip, None to reject ``j``.

        With ``force`` a column blocked only by tiny pivots still pivots on
        the largest of them.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.abs(alpha)
            moving = mag > _ZERO_TOL
            # Harris pass one: largest step with bounds relaxed by the tolerance
            relaxed = np.where(moving, (room + _HARRIS) / mag, math.inf)
            exact = np.where(moving, room / mag, math.inf)
        t_flip = self.upper[j] - self.lower[j]
        if not self.m:
            return -1, t_flip
        t_max = float(relaxed.min())
        if t_max >= t_flip:
            return -1, t_flip
        near = np.flatnonzero(exact <= t_max)
        usable = near[mag[near] >= _PIV_TOL * max(1.0, float(mag.max()))]
        if not len(usable):
            if not force:
                return None     # only tiny pivots block this column
            usable = near
        if bland:
            r = int(usable[np.argmin(self.basis[usable])])
        else:
            r = int(usable[np.argmax(mag[usable])])
        return r, float(exact[r])

    def _step(self, j, s, r, t, alpha, is_basic):
        if math.isinf(t):
            raise NumericalFailure("unbounded direction under finite bounds")
        self.iterations += 1
        self.x[self.basis] -= t * alpha
        if r < 0:
            self.x[j] = self.upper[j] if s > 0 else self.lower[j]
            return None
        leaving = self.basis[r]
        self.x[j] = self.x[j] + s * t
        self.x[leaving] = self.lower[leaving] if alpha[r] > 0 else self.upper[leaving]
        col = self.T[:, j].copy()
        self.T[r] /= col[r]
        rowr = self.T[r]
        col[r] = 0.0
        self.T -= np.outer(col, rowr)
        is_basic[leaving] = False
        is_basic[j] = True
        self.basis[r] = j
        return rowr

    def _check_limit(self, max_iter):
        if self.iterations >= max_iter:
            raise NumericalFailure(
                f"simplex pivot limit {max_iter} reached; the instance may need rescaling")

    def run(self, c, max_iter):
        """Minimize ``c.x`` from the current (primal feasible) basic solution."""
        d = c - c[self.basis] @ self.T
        is_basic = self._basic_mask()
        degenerate = 0
        since_refactor = 0
        rejected = np.zeros(self.N, dtype=bool)
        while True:
            self._check_limit(max_iter)
            bland = degenerate >= _DEGENERATE_RUN
            j, s = self._entering(d, is_basic, rejected, bland)
            force = False
            if j < 0:
                if not rejected.any():
                    return d
                # every improving column was blocked by tiny pivots: refresh and force one
                self.refactor()
                is_basic = self._basic_mask()
                d = c - c[self.basis] @ self.T
                since_refactor = 0
                rejected[:] = False
                j, s = self._entering(d, is_basic, rejected, bland)
                if j < 0:
                    return d
                force = True
            alpha = s * self.T[:, j]
            xb = self.x[self.basis]
            room = np.where(alpha > 0, xb - self.lower[self.basis], self.upper[self.basis] - xb)
            picked = self._ratio(j, alpha, np.maximum(room, 0.0), bland, force)
            if picked is None:
                rejected[j] = True
                continue
            rejected[:] = False
            r, t = picked
            degenerate = degenerate + 1 if t <= 1e-12 else 0
            rowr = self._step(j, s, r, t, alpha, is_basic)
            if rowr is None:
                continue
            d = d - d[j] * rowr
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                is_basic = self._basic_mask()
                d = c - c[self.basis] @ self.T
                since_refactor = 0

    def infeasible_basics(self, tol):
        xb = self.x[self.basis]
        slack = tol * np.maximum(1.0, np.abs(xb))
        return xb < self.lower[self.basis] - slack, xb > self.upper[self.basis] + slack

    def restore(self, max_iter, tol=_HARRIS) -> bool:
        """Drive basic variables back inside their bounds (composite phase one)."""
        is_basic = self._basic_mask()
        rejected = np.zeros(self.N, dtype=bool)
        degenerate = 0
        since_refactor = 0
        force = False
        while True:
            self._check_limit(max_iter)
            below, above = self.infeasible_basics(tol)
            if not (below.any() or above.any()):
                return True
            c = np.zeros(self.N)
            c[self.basis] = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            d = c - c[self.basis] @ self.T
            bland = degenerate >= _DEGENERATE_RUN
            j, s = self._entering(d, is_basic, rejected, bland)
            if j < 0:
                if not rejected.any() or force:
                    return False
                # every improving column was blocked by tiny pivots: refresh and force one
                self.refactor()
                is_basic = self._basic_mask()
                since_refactor = 0
                rejected[:] = False
                force = True
                continue
            alpha = s * self.T[:, j]
            xb = self.x[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]
            # infeasible basics may cross their violated bound; only the far one blocks
            room = np.where(alpha > 0,
                            np.where(below, math.inf, np.where(above, xb - lb, xb - lb)),
                            np.where(above, math.inf, np.where(below, ub - xb, ub - xb)))
            picked = self._ratio(j, alpha, np.maximum(room, 0.0), bland, force)
            if picked is None:
                rejected[j] = True
                continue
            rejected[:] = False
            force = False
            r, t = picked
            degenerate = degenerate + 1 if t <= 1e-12 else 0
            if self._step(j, s, r, t, alpha, is_basic) is not None:
                since_refactor += 1
                if since_refactor >= _REFACTOR_EVERY:
                    self.refactor()
                    is_basic = self._basic_mask()
                    since_refactor = 0


def _equilibrate(A, passes: int = 4):
    """Row and column factors that bring nonzero magnitudes near one."""
    m, n = A.shape
    row_f = np.ones(m)
    col_f = np.ones(n)
    if not A.size:
        return row_f, col_f
    mag = np.abs(A)
    nz = mag > 0
    with np.errstate(divide="ignore"):
        logs = np.where(nz, np.log2(np.where(nz, mag, 1.0)), 0.0)
    r = np.zeros(m)
    c = np.zeros(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)   # empty columns
        for _ in range(passes):
            cur = np.where(nz, logs + r[:, None] + c, np.nan)
            with np.errstate(all="ignore"):
                r -= np.nan_to_num((np.nanmax(cur, axis=1) + np.nanmin(cur, axis=1)) / 2)
            cur = np.where(nz, logs + r[:, None] + c, np.nan)
            with np.errstate(all="ignore"):
                c -= np.nan_to_num((np.nanmax(cur, axis=0) + np.nanmin(cur, axis=0)) / 2)
    cur = np.where(nz, logs + r[:, None] + c, -np.inf)
    r -= np.max(cur, axis=1)            # every row's largest entry becomes one
    # powers of two keep the scaling exact
    return np.exp2(np.round(r)), np.exp2(np.round(c))


def solve_lp(lp: LinearProgram, feas_tol: float = FEAS_TOL, max_iter: int | None = None) -> LpSolution:
    """Solve the continuous relaxation of ``lp`` (integrality is ignored)."""
    n = lp.num_vars
    lower = lp.lower.astype(float).copy()
    upper = lp.upper.astype(float).copy()
    if np.any(lower > upper + feas_tol):
        return LpSolution(Status.INFEASIBLE)
    upper = np.maximum(upper, lower)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("solve_lp requires finite bounds on every variable")

    A = lp.A.astype(float)
    b = lp.b.astype(float)
    sense = lp.sense
    scale = np.abs(A).max(axis=1) if A.size else np.zeros(0)
    keep = scale > 0
    for r in np.flatnonzero(~keep):
        if (sense[r] < 0 and b[r] < -feas_tol) or (sense[r] > 0 and b[r] > feas_tol) \
                or (sense[r] == 0 and abs(b[r]) > feas_tol):
            return LpSolution(Status.INFEASIBLE)
    A = A[keep]
    b = b[keep]
    sense = sense[keep]
    m = A.shape[0]
    row_f, col_f = _equilibrate(A)
    A = A * row_f[:, None] * col_f
    b = b * row_f
    c_scaled = lp.c * col_f
    lower = lower / col_f
    upper = upper / col_f
    if max_iter is None:
        max_iter = max(1000, 100 * max(m, 1) * max(n, 1))

    if m == 0:
        x = np.where(lp.c >= 0, lower, upper) * col_f
        return LpSolution(Status.OPTIMAL, x, float(lp.c @ x))

    ineq = np.flatnonzero(sense != 0)
    n_slack = len(ineq)
    slack_cols = np.zeros((m, n_slack))
    slack_cols[ineq, np.arange(n_slack)] = np.where(sense[ineq] < 0, 1.0, -1.0)

    # nonbasic structurals start at the bound nearer zero
    x0 = np.where(np.abs(lower) <= np.abs(upper), lower, upper)
    resid = b - A @ x0

    # rows whose slack can absorb the starting residual need no artificial
    slack_of_row = {int(r): n + s for s, r in enumerate(ineq)}
    art_rows = [r for r in range(m)
                if r not in slack_of_row or resid[r] * (1.0 if sense[r] < 0 else -1.0) < 0]
    n_art = len(art_rows)
    art_cols = np.zeros((m, n_art))
    art_sign = np.sign(resid[art_rows])
    art_sign[art_sign == 0] = 1.0
    art_cols[art_rows, np.arange(n_art)] = art_sign
    art_index = {r: n + n_slack + a for a, r in enumerate(art_rows)}
    basis = []
    for r in range(m):
        if r in art_index:
            basis.append(art_index[r])
        else:
            basis.append(slack_of_row[r])

    full_A = np.hstack([A, slack_cols, art_cols])
    N = full_A.shape[1]
    lo = np.concatenate([lower, np.zeros(n_slack + n_art)])
    hi = np.concatenate([upper, np.full(n_slack, math.inf), np.full(n_art, math.inf)])
    x = np.concatenate([x0, np.zeros(n_slack + n_art)])
    logical = np.array([slack_of_row.get(r, art_index.get(r, -1)) for r in range(m)])
    tab = _Tableau(full_A, b, lo, hi, n, logical)
    tab.start(basis, x)

    if n_art:
        c1 = np.zeros(N)
        c1[n + n_slack:] = 1.0
        tab.run(c1, max_iter)
        infeas = float(tab.x[n + n_slack:].sum())
        if infeas > feas_tol:
            return LpSolution(Status.INFEASIBLE, iterations=tab.iterations)
        # pin artificials at zero; basic ones stay degenerate
        tab.upper[n + n_slack:] = 0.0
        tab.x[n + n_slack:] = 0.0
        tab.refactor()

    c2 = np.zeros(N)
    c2[:n] = c_scaled
    scaled = LinearProgram(c_scaled, A, sense, b, lower, upper)
    for _ in range(_CLEANUP_ROUNDS):
        tab.run(c2, max_iter)
        tab.refactor()
        below, above = tab.infeasible_basics(_HARRIS)
        if not (below.any() or above.any()):
            break
        # the fresh factorization disagrees with the tracked point; repair and resume
        if not tab.restore(max_iter):
            # no direction reduces the leftover infeasibility: the rows admit
            # no point at working precision
            return LpSolution(Status.INFEASIBLE, iterations=tab.iterations)
    xs_scaled = np.clip(tab.x[:n], lower, upper)
    viol = scaled.max_violation(xs_scaled, relative=True)
    if viol > feas_tol:
        raise NumericalFailure(f"simplex point violates scaled rows by {viol:.3g}")
    xs = np.clip(xs_scaled * col_f, lp.lower, np.maximum(lp.upper, lp.lower))
    return LpSolution(Status.OPTIMAL, xs, float(lp.c @ xs), iterations=tab.iterations)


@dataclass(order=True)
class _Node:
    bound: float
    branch_var: int
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    sol: LpSolution = field(compare=False)


def _most_fractional(x, integers, tol):
    best, best_frac = -1, tol
    for i in integers:
        frac = abs(x[i] - round(x[i]))
        if frac > best_frac + 1e-15:
            best, best_frac = i, frac
    return best


def solve_milp(lp: LinearProgram, int_tol: float = INT_TOL, feas_tol: float = FEAS_TOL,
               node_limit: int = 100000) -> LpSolution:
    """Best-first branch-and-bound over the 0/1 variables in ``lp.integers``.

    Open nodes are ordered by LP bound; ties go to the node whose branching
    variable has the lower index, then to the older node.
    """
    for i in lp.integers:
        if lp.lower[i] < -feas_tol or lp.upper[i] > 1 + feas_tol:
            raise ValueError(f"integer variable {i} has bounds outside [0, 1]")
    root = solve_lp(lp, feas_tol=feas_tol)
    if not root.optimal or not lp.integers:
        return root
    heap: list[_Node] = []
    seq = 0
    heapq.heappush(heap, _Node(root.objective, -1, seq, lp.lower.copy(), lp.upper.copy(), root))
    incumbent = LpSolution(Status.INFEASIBLE)
    nodes = branched = 0
    iters = root.iterations
    while heap:
        node = heapq.heappop(heap)
        if node.bound >= incumbent.objective - 1e-12:
            break
        nodes += 1
        if nodes > node_limit:
            raise NumericalFailure(f"MILP node limit {node_limit} reached")
        x = node.sol.point
        j = _most_fractional(x, lp.integers, int_tol)
        if j < 0:
            pt = x.copy()
            for i in lp.integers:
                pt[i] = float(round(pt[i]))
            incumbent = LpSolution(Status.OPTIMAL, pt, node.sol.objective)
            continue
        branched += 1
        for val in (0.0, 1.0):
            lo = node.lower.copy()
            hi = node.upper.copy()
            lo[j] = hi[j] = val
            sol = solve_lp(lp.with_bounds(lo, hi), feas_tol=feas_tol)
            iters += sol.iterations
            if sol.optimal and sol.objective < incumbent.objective - 1e-12:
                seq += 1
                heapq.heappush(heap, _Node(sol.objective, j, seq, lo, hi, sol))
    incumbent.iterations = iters
    incumbent.nodes = branched
    return incumbent
