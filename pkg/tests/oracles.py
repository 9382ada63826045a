"""Slow, obviously-correct reference solvers used only by the tests."""
import itertools
import math

import numpy as np

from c3sbb.relax import LinearProgram


def _constraints(lp: LinearProgram):
    """Every row and bound as ``g.x (<=|==) h`` pairs, with an equality flag."""
    n = lp.num_vars
    G, h, eq = [], [], []
    for r in range(lp.num_rows):
        a, b, s = lp.A[r], lp.b[r], lp.sense[r]
        if s > 0:
            a, b = -a, -b
        G.append(a); h.append(b); eq.append(s == 0)
    eye = np.eye(n)
    implied = _implied_upper(lp)
    for j in range(n):
        G.append(-eye[j]); h.append(-lp.lower[j]); eq.append(False)
        if lp.upper[j] == lp.lower[j]:
            eq[-1] = True
        elif lp.upper[j] < implied[j]:
            G.append(eye[j]); h.append(lp.upper[j]); eq.append(False)
    return np.array(G), np.array(h), np.array(eq)


def _implied_upper(lp: LinearProgram):
    """Upper limits already forced by nonnegative <= rows when every lower bound is >= 0.

    An upper bound at or above its implied limit can never be tight on its
    own, so leaving it out does not lose any vertex.
    """
    out = np.full(lp.num_vars, np.inf)
    if np.any(lp.lower < 0):
        return out
    for r in range(lp.num_rows):
        a = lp.A[r]
        if lp.sense[r] < 0 and np.all(a >= 0):
            pos = a > 0
            out[pos] = np.minimum(out[pos], lp.b[r] / a[pos])
    return out


def vertex_lp(lp: LinearProgram, tol: float = 1e-9, chunk: int = 20000):
    """Minimum of ``c.x`` over all vertices, or None if there is none.

    Every n-subset of constraints containing all equalities is made tight
    and solved; feasible solutions are vertices.  Bounded feasible sets
    attain their minimum at one of them.
    """
    G, h, eq = _constraints(lp)
    n = lp.num_vars
    must = np.flatnonzero(eq)
    free = np.flatnonzero(~eq)
    k = n - len(must)
    if k < 0:
        return None
    best = math.inf
    scale = np.maximum(1.0, np.abs(G).sum(axis=1) + np.abs(h))
    combos = itertools.combinations(free, k)
    while True:
        batch = list(itertools.islice(combos, chunk))
        if not batch:
            break
        idx = np.hstack([np.broadcast_to(must, (len(batch), len(must))),
                         np.array(batch, dtype=int).reshape(len(batch), k)])
        M = G[idx]
        rhs = h[idx]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-10
        if not ok.any():
            continue
        x = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        slack = x @ G.T - h
        feas = np.all(slack <= tol * scale, axis=1)
        feas &= np.all(np.abs(slack[:, eq]) <= tol * scale[eq], axis=1)
        if feas.any():
            best = min(best, float(np.min(x[feas] @ lp.c)))
    return None if math.isinf(best) else best


def enumerate_binary(lp: LinearProgram):
    """Exhaustive minimum for a pure 0/1 problem."""
    n = lp.num_vars
    best, arg = math.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if np.any(x < lp.lower - 1e-12) or np.any(x > lp.upper + 1e-12):
            continue
        if lp.max_violation(x) <= 1e-9 and lp.c @ x < best:
            best, arg = float(lp.c @ x), x
    return best, arg


def random_packing_lp(rng: np.random.Generator, m: int = 10, n: int = 10) -> LinearProgram:
    """Mixed-sign rows inside a bounded packing region.

    Rows are built around a hidden feasible point; about one instance in ten
    gets an unreachable >= row instead.
    """
    lower = np.zeros(n)
    upper = np.full(n, 100.0)
    tight = rng.choice(n, size=2, replace=False)
    upper[tight] = rng.uniform(0.3, 2.0, 2)
    x0 = rng.uniform(0.0, 0.3, n)
    A = rng.uniform(-1.0, 1.0, (m, n))
    A[0] = rng.uniform(0.2, 1.0, n)
    sense = rng.choice([-1, -1, 1, 0], size=m)
    sense[0] = -1
    act = A @ x0
    b = act + np.where(sense < 0, 1, -1) * np.where(sense == 0, 0.0, rng.uniform(0.0, 1.0, m))
    b[0] = act[0] + rng.uniform(0.5, 4.0)
    if rng.random() < 0.1:
        reach = np.minimum(upper, b[0] / A[0])
        sense[1] = 1
        b[1] = float(np.maximum(A[1], 0) @ reach) + 1.0
    c = rng.uniform(-1.0, 1.0, n)
    return LinearProgram(c, A, sense, b, lower, upper)
