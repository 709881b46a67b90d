"""Exact LP kernels: a transportation solver over ``D`` and the structured dual LP.

``transport_solve`` maximises ``<profit, X>`` over ``Xe = e, X^T e = m, X >= 0``
with the MODI (u-v) method.  Degeneracy is removed by Orden's lexicographic
perturbation: every supply becomes ``1 + eps`` and the last demand
``m_k + n eps``.  Basic flows are stored as exact integer pairs ``(a, b)``
meaning ``a + b eps``, so the returned vertex is integral by construction.

Because every row carries supply one, a basis tree with ``n + k - 1`` cells has
at most ``k - 1`` rows holding two or more cells.  Those rows together with the
``k`` columns form a small "skeleton"; every other row is a leaf hanging off a
single column.  Potentials and pivot cycles are computed on the skeleton, the
leaves are handled with vectorised numpy, so a pivot costs ``O(nk)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .spectral import min_scalar_product

SNAP_TOL = 1e-9


class LpError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TransportBasis:
    mask: np.ndarray   # (n, k) bool, basic cells
    fa: np.ndarray     # integer part of basic flows
    fb: np.ndarray     # eps coefficient of basic flows


@dataclass(frozen=True, eq=False)
class TransportSolution:
    X: np.ndarray      # (n, k) int64 partition matrix
    value: float
    u: np.ndarray
    v: np.ndarray
    basis: TransportBasis
    pivots: int


def _northwest(n: int, m: np.ndarray) -> TransportBasis:
    k = m.size
    mask = np.zeros((n, k), dtype=bool)
    fa = np.zeros((n, k), dtype=np.int64)
    fb = np.zeros((n, k), dtype=np.int64)
    i = j = 0
    sa, sb = 1, 1
    da, db = int(m[0]), (n if k == 1 else 0)
    while i < n and j < k:
        if (sa, sb) <= (da, db):
            xa, xb = sa, sb
        else:
            xa, xb = da, db
        mask[i, j] = True
        fa[i, j], fb[i, j] = xa, xb
        sa, sb = sa - xa, sb - xb
        da, db = da - xa, db - xb
        if sa == 0 and sb == 0:
            i += 1
            sa, sb = 1, 1
        else:
            j += 1
            if j < k:
                da, db = int(m[j]), (n if j == k - 1 else 0)
    if mask.sum() != n + k - 1:
        raise LpError("north-west corner produced a degenerate basis")
    return TransportBasis(mask, fa, fb)


class _Tree:
    """Incrementally maintained skeleton view of a transportation basis."""

    def __init__(self, mask: np.ndarray):
        self.k = mask.shape[1]
        self.deg = mask.sum(axis=1)
        if np.any(self.deg == 0):
            raise LpError("basis leaves a row uncovered")
        self.leaf_col = np.argmax(mask, axis=1)
        self.row_cols: dict[int, list[int]] = {
            int(r): np.flatnonzero(mask[r]).tolist() for r in np.flatnonzero(self.deg >= 2)}
        self.col_rows: list[set[int]] = [set() for _ in range(self.k)]
        for r, cols in self.row_cols.items():
            for c in cols:
                self.col_rows[c].add(r)

    def add(self, i: int, j: int) -> None:
        self.deg[i] += 1
        if self.deg[i] == 2:
            c = int(self.leaf_col[i])
            self.row_cols[i] = [c, j]
            self.col_rows[c].add(i)
        else:
            self.row_cols[i].append(j)
        self.col_rows[j].add(i)

    def remove(self, r: int, c: int) -> None:
        self.deg[r] -= 1
        cols = self.row_cols[r]
        cols.remove(c)
        self.col_rows[c].discard(r)
        if self.deg[r] == 1:
            other = cols[0]
            self.leaf_col[r] = other
            self.col_rows[other].discard(r)
            del self.row_cols[r]

    def potentials(self, P: np.ndarray):
        n, k = P.shape
        v = [None] * k
        v[0] = 0.0
        ur: dict[int, float] = {}
        queue = deque([("c", 0)])
        while queue:
            kind, a = queue.popleft()
            if kind == "c":
                for r in self.col_rows[a]:
                    if r not in ur:
                        ur[r] = P[r, a] - v[a]
                        queue.append(("r", r))
            else:
                for c in self.row_cols[a]:
                    if v[c] is None:
                        v[c] = P[a, c] - ur[a]
                        queue.append(("c", c))
        if any(x is None for x in v):
            raise LpError("basis is not a spanning tree")
        v = np.asarray(v, dtype=np.float64)
        u = P[np.arange(n), self.leaf_col] - v[self.leaf_col]
        for r, val in ur.items():
            u[r] = val
        return u, v

    def path(self, i: int, j: int) -> list[tuple[int, int]]:
        """Tree cells on the path from row ``i`` to column ``j``."""
        if i in self.row_cols:
            start, prefix = ("r", i), []
        else:
            c = int(self.leaf_col[i])
            start, prefix = ("c", c), [(i, c)]
        goal = ("c", j)
        parent = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                break
            kind, a = node
            nbrs = [("r", r) for r in sorted(self.col_rows[a])] if kind == "c" \
                else [("c", c) for c in self.row_cols[a]]
            for nb in nbrs:
                if nb not in parent:
                    parent[nb] = node
                    queue.append(nb)
        if goal not in parent:
            raise LpError("basis tree is disconnected")
        cells = []
        node = goal
        while parent[node] is not None:
            prev = parent[node]
            a, b = (prev, node) if prev[0] == "r" else (node, prev)
            cells.append((a[1], b[1]))
            node = prev
        cells.reverse()
        return prefix + cells


def transport_solve(profit, m, warm_start: TransportBasis | None = None,
                    max_pivots: int | None = None) -> TransportSolution:
    """Maximise ``<profit, X>`` over the transportation polytope ``D``."""
    P = np.asarray(profit, dtype=np.float64)
    m = np.asarray(getattr(m, "m", m), dtype=np.int64)
    if P.ndim != 2 or P.shape[1] != m.size:
        raise ValueError("profit must be n x k with k = len(m)")
    n, k = P.shape
    if np.any(m < 0) or int(m.sum()) != n:
        raise LpError(f"inconsistent demands: sum(m)={int(m.sum())} but n={n}")
    if not np.all(np.isfinite(P)):
        raise ValueError("profit must be finite")
    if warm_start is not None and warm_start.mask.shape == (n, k):
        mask, fa, fb = warm_start.mask.copy(), warm_start.fa.copy(), warm_start.fb.copy()
    else:
        b0 = _northwest(n, m)
        mask, fa, fb = b0.mask, b0.fa, b0.fb
    scale = max(1.0, float(np.max(np.abs(P)))) if P.size else 1.0
    tol = 1e-12 * scale
    max_pivots = max_pivots or 50 * (n + k) * k
    pivots = 0
    tree = _Tree(mask)
    while True:
        u, v = tree.potentials(P)
        red = P - u[:, None] - v[None, :]
        red[mask] = 0.0
        q = int(np.argmax(red))
        if red.flat[q] <= tol:
            break
        if pivots >= max_pivots:
            raise LpError("transportation simplex exceeded its pivot budget")
        i, j = divmod(q, k)
        cells = tree.path(i, j)
        minus = cells[0::2]
        plus = cells[1::2]
        leave = min(minus, key=lambda c: (fa[c], fb[c], c))
        ta, tb = int(fa[leave]), int(fb[leave])
        for c in minus:
            fa[c] -= ta
            fb[c] -= tb
        for c in plus:
            fa[c] += ta
            fb[c] += tb
        mask[i, j] = True
        fa[i, j], fb[i, j] = ta, tb
        tree.add(i, j)
        mask[leave] = False
        fa[leave] = fb[leave] = 0
        tree.remove(*leave)
        pivots += 1
    X = np.where(mask, fa, 0).astype(np.int64)
    if np.any(X < 0) or np.any(X > 1):
        raise LpError("transportation vertex is not a partition matrix")
    if not (np.all(X.sum(axis=1) == 1) and np.array_equal(X.sum(axis=0), m)):
        raise LpError("transportation vertex violates the marginals")
    # complementary slackness: positive flow only where the reduced profit vanishes
    red = P - u[:, None] - v[None, :]
    if np.max(red) > 1e-9 * scale or np.max(np.abs(red[X > 0])) > 1e-9 * scale:
        raise LpError("complementary slackness check failed")
    value = float(np.sum(P[X > 0]))
    return TransportSolution(X, value, u, v, TransportBasis(mask, fa, fb), pivots)


def snap_integral(X, tol: float = SNAP_TOL) -> np.ndarray:
    """Snap a numerically 0/1 matrix to integers; fail on genuinely fractional entries."""
    X = np.asarray(X, dtype=np.float64)
    frac = (X > tol) & (X < 1.0 - tol)
    if np.any(frac):
        raise LpError(f"{int(frac.sum())} entries are fractional beyond {tol}")
    return (X >= 0.5).astype(np.int64)


@dataclass(frozen=True, eq=False)
class DualLpSolution:
    s: np.ndarray
    t: np.ndarray
    value: float
    pivots: int


def dual_lp_solve(lam, sigma, max_pivots: int | None = None) -> DualLpSolution:
    """Maximise ``1/2 (sum s + sum t)`` s.t. ``t_i + s_j <= lam_i sigma_j``, ``s <= 0``.

    The LP is solved through its dual, the assignment-type problem
    ``min sum lam_i sigma_j y_ij`` with ``sum_j y_ij = 1``,
    ``sum_i y_ij + w_j = 1`` and ``y, w >= 0``, by a dense revised simplex with
    Bland's rule.  The start basis is the pairing of the minimal scalar
    product; ``(t, s)`` are the simplex multipliers at optimality.
    """
    lam = np.asarray(lam, dtype=np.float64).ravel()
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(sigma))):
        raise ValueError("dual LP data must be finite")
    K, N = lam.size, sigma.size
    if K > N:
        raise ValueError("need len(lam) <= len(sigma)")
    if K == 0:
        return DualLpSolution(np.zeros(N), np.zeros(0), 0.0, 0)
    mrows = K + N
    cost = np.outer(lam, sigma)
    scale = max(1.0, float(np.max(np.abs(cost))))
    tol = 1e-11 * scale

    # crash basis: y_{i,phi(i)} for each i, then w_j for every j
    _, phi = min_scalar_product(sigma, np.concatenate([lam, np.zeros(N - K)]))
    basis = [int(i * N + phi[i]) for i in range(K)] + [K * N + j for j in range(N)]

    def column(var: int) -> np.ndarray:
        a = np.zeros(mrows)
        if var < K * N:
            i, j = divmod(var, N)
            a[i] = 1.0
            a[K + j] = 1.0
        else:
            a[K + var - K * N] = 1.0
        return a

    def var_cost(var: int) -> float:
        return float(cost.flat[var]) if var < K * N else 0.0

    def refactor():
        Bm = np.column_stack([column(b) for b in basis])
        Binv = np.linalg.inv(Bm)
        return Binv, Binv @ np.ones(mrows)

    Binv, xB = refactor()
    max_pivots = max_pivots or 200 * (mrows + K * N)
    pivots = 0
    while True:
        cB = np.array([var_cost(b) for b in basis])
        pi = cB @ Binv
        t, s = pi[:K], pi[K:]
        red_y = cost - t[:, None] - s[None, :]
        red_w = -s
        cand_y = np.flatnonzero(red_y.ravel() < -tol)
        cand_w = np.flatnonzero(red_w < -tol)
        if cand_y.size == 0 and cand_w.size == 0:
            break
        if pivots >= max_pivots:
            raise LpError("simplex pivot guard exceeded")
        enter = int(cand_y[0]) if cand_y.size else int(K * N + cand_w[0])
        d = Binv @ column(enter)
        pos = d > 1e-12
        if not np.any(pos):
            raise LpError("dual LP is unbounded")
        ratios = np.full(mrows, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12)
        r = min(ties, key=lambda idx: basis[idx])
        # eta update of the inverse
        piv = d[r]
        Binv[r] /= piv
        other = np.arange(mrows) != r
        Binv[other] -= np.outer(d[other], Binv[r])
        theta = xB[r] / piv
        xB[other] -= theta * d[other]
        xB[r] = theta
        basis[r] = enter
        pivots += 1
        if pivots % 200 == 0:
            Binv, xB = refactor()
    s = np.minimum(s, 0.0)
    # tighten t against the (clamped) s so the pair is exactly feasible
    t = np.min(cost - s[None, :], axis=1)
    value = 0.5 * (float(s.sum()) + float(t.sum()))
    ref = 0.5 * min_scalar_product(sigma, np.concatenate([lam, np.zeros(N - K)]))[0]
    if abs(value - ref) > 1e-8 * max(1.0, abs(ref), scale):
        raise LpError(f"dual LP value {value!r} disagrees with the minimal scalar product {ref!r}")
    return DualLpSolution(s, t, value, pivots)
