"""Symmetric eigensolvers, the minimal scalar product and projection bases.

The projection bases realise an orthonormal ``n x (n-1)`` matrix ``V`` with
``V^T e = 0`` without ever forming it for the sparse kinds:

* ``V0`` -- the triangular pattern with column ``j`` equal to
  ``(1, ..., 1, -j, 0, ..., 0)`` scaled by ``s_j = sqrt(j + j^2)``;
* ``V1`` -- dyadic +-1 blocks (Haar levels) with deferred scaling, completed
  by a few columns constant on the binary-digit intervals of ``n``;
* ``dense`` -- the Householder completion of ``e / sqrt(n)``.
"""
from __future__ import annotations

import heapq
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

LANCZOS_TOL = 1e-7
DENSE_CUTOFF = 200
SYM_TOL = 1e-12


class EigenSolverError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (best residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    values: np.ndarray   # nonincreasing
    vectors: np.ndarray  # matching orthonormal columns

    def __len__(self):
        return self.values.size


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the first component of each column with |x| > 1e-12 positive."""
    if vecs.size == 0:
        return vecs
    big = np.abs(vecs) > 1e-12 * np.max(np.abs(vecs), axis=0, keepdims=True)
    first = np.argmax(big, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sym_eig_dense(S) -> SpectralDecomposition:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > SYM_TOL * scale:
        raise ValueError("matrix is not symmetric")
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    return SpectralDecomposition(w[::-1].copy(), _fix_signs(U[:, ::-1].copy()))


def _as_operator(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    return aslinearoperator(op)


def _to_dense(op: LinearOperator) -> np.ndarray:
    t = op.shape[0]
    if isinstance(op, np.ndarray):
        return np.asarray(op, dtype=np.float64)
    M = op.matmat(np.eye(t))
    return 0.5 * (M + M.T)


def extremal_eigs(op, n_top: int, n_bottom: int, tol: float = LANCZOS_TOL, seed: int = 0,
                  max_restarts: int = 500, dense_cutoff: int = DENSE_CUTOFF
                  ) -> tuple[SpectralDecomposition, SpectralDecomposition]:
    """Largest ``n_top`` and smallest ``n_bottom`` eigenpairs of a symmetric operator.

    Operators of size ``<= dense_cutoff`` are materialised and solved densely.
    Larger ones use thick-restart Lanczos with full reorthogonalisation and a
    seeded start vector; converged pairs satisfy
    ``||op v - lam v|| <= tol * ||op||`` (norm estimated by the extreme Ritz
    values).  After convergence the operator is deflated by the pairs found and
    searched again from a fresh start so that repeated eigenvalues, which a
    single Krylov sequence cannot see twice, are not missed.

    Returns ``(top, bottom)``; both hold values in nonincreasing order.
    """
    if isinstance(op, np.ndarray) or sp.issparse(op):
        raw = op
    else:
        raw = None
    A = _as_operator(op)
    t = A.shape[0]
    if n_top < 0 or n_bottom < 0 or n_top + n_bottom > t:
        raise ValueError("requested more eigenpairs than the operator dimension")
    if t <= dense_cutoff:
        M = np.asarray(raw.toarray() if sp.issparse(raw) else raw, dtype=np.float64) \
            if raw is not None else _to_dense(A)
        full = sym_eig_dense(0.5 * (M + M.T))
        top = SpectralDecomposition(full.values[:n_top], full.vectors[:, :n_top])
        bot = SpectralDecomposition(full.values[t - n_bottom:], full.vectors[:, t - n_bottom:])
        return top, bot

    rng = np.random.default_rng(seed)
    vals, vecs, anorm = _trl(A, t, n_top, n_bottom, tol, rng, np.zeros((t, 0)), max_restarts)
    top_v, top_x = vals[:n_top], vecs[:, :n_top]
    bot_v, bot_x = vals[n_top:], vecs[:, n_top:]
    # multiplicity guard: search the complement of everything found; stop a side once the
    # fresh extreme value no longer beats the kept set
    want_t, want_b = n_top > 0, n_bottom > 0
    while want_t or want_b:
        locked = np.column_stack([top_x, bot_x])
        if locked.shape[1] >= t - 1:
            break
        cv, cx, cn = _trl(A, t, int(want_t), int(want_b), tol, rng, locked, max_restarts)
        anorm = max(anorm, cn)
        slack = 10 * tol * anorm
        if want_t:
            if cv[0] > top_v[-1] + slack:
                top_v = np.append(top_v, cv[0])
                top_x = np.column_stack([top_x, cx[:, 0]])
                order = np.argsort(-top_v, kind="stable")[:n_top]
                top_v, top_x = top_v[order], top_x[:, order]
            else:
                want_t = False
        if want_b:
            if cv[-1] < bot_v[0] - slack:
                bot_v = np.append(bot_v, cv[-1])
                bot_x = np.column_stack([bot_x, cx[:, -1]])
                order = np.argsort(bot_v, kind="stable")[:n_bottom][::-1]
                bot_v, bot_x = bot_v[order], bot_x[:, order]
            else:
                want_b = False
    top = SpectralDecomposition(top_v, _fix_signs(top_x))
    bot = SpectralDecomposition(bot_v, _fix_signs(bot_x))
    return top, bot


def _trl(A: LinearOperator, t: int, n_top: int, n_bot: int, tol: float,
         rng: np.random.Generator, U: np.ndarray, max_restarts: int):
    """Thick-restart Lanczos on ``A`` restricted to the complement of ``range(U)``.

    Returns ``(values, vectors, norm_estimate)`` with the ``n_top`` largest
    values (nonincreasing) followed by the ``n_bot`` smallest (nonincreasing).
    """
    want = n_top + n_bot
    dim = t - U.shape[1]
    ncv = min(dim, max(2 * want + 40, 80))
    if ncv <= want:
        ncv = dim

    def deflate(x):
        if U.shape[1]:
            x = x - U @ (U.T @ x)
        return x

    def start_vector(Q, j):
        for _ in range(5):
            q = deflate(rng.standard_normal(t))
            if j:
                q -= Q[:, :j] @ (Q[:, :j].T @ q)
                q -= Q[:, :j] @ (Q[:, :j].T @ q)
            q = deflate(q)
            nq = np.linalg.norm(q)
            if nq > 1e-8:
                return q / nq
        raise EigenSolverError("could not build a start vector", np.inf)

    Q = np.zeros((t, ncv + 1))
    H = np.zeros((ncv, ncv))
    Q[:, 0] = start_vector(Q, 0)
    l = 0
    beta = 0.0
    best = np.inf
    anorm = 0.0
    for _ in range(max_restarts):
        for j in range(l, ncv):
            w = deflate(A.matvec(Q[:, j]))
            h = Q[:, : j + 1].T @ w
            w -= Q[:, : j + 1] @ h
            h2 = Q[:, : j + 1].T @ w
            w -= Q[:, : j + 1] @ h2
            w = deflate(w)
            h += h2
            H[: j + 1, j] = h
            H[j, : j + 1] = h
            beta = np.linalg.norm(w)
            if beta <= 1e-14 * max(1.0, anorm, np.max(np.abs(h))):
                beta = 0.0
                if j + 1 < ncv:
                    Q[:, j + 1] = start_vector(Q, j + 1)
                    continue
            else:
                Q[:, j + 1] = w / beta
        theta, S = np.linalg.eigh(0.5 * (H + H.T))
        anorm = max(anorm, float(np.max(np.abs(theta))))
        resid = beta * np.abs(S[-1, :])
        idx_top = np.arange(ncv - 1, ncv - 1 - n_top, -1)
        idx_bot = np.arange(n_bot - 1, -1, -1)
        wanted = np.concatenate([idx_top, idx_bot]).astype(int)
        worst = float(np.max(resid[wanted])) if want else 0.0
        best = min(best, worst)
        if worst <= tol * max(anorm, 1e-300) or ncv == dim:
            X = Q[:, :ncv] @ S[:, wanted]
            return theta[wanted], X, anorm
        # thick restart: keep the wanted Ritz vectors plus neighbours
        extra = (ncv - want) // 2
        keep_top = min(ncv, n_top + extra // 2 if n_bot else n_top + extra)
        keep_bot = min(ncv - keep_top, n_bot + extra // 2 if n_top else n_bot + extra)
        keep = np.concatenate([np.arange(ncv - keep_top, ncv), np.arange(keep_bot)])
        keep = np.unique(keep)
        l = keep.size
        Q[:, :l] = Q[:, :ncv] @ S[:, keep]
        Q[:, l] = Q[:, ncv]
        H[:] = 0.0
        H[np.arange(l), np.arange(l)] = theta[keep]
        if beta == 0.0:
            Q[:, l] = start_vector(Q, l)
    raise EigenSolverError("Lanczos did not converge", best)


def min_scalar_product(x, y) -> tuple[float, np.ndarray]:
    """Minimal scalar product ``min_phi sum_i x[phi(i)] * y[i]``.

    Returns the value and the lexicographically smallest optimal permutation
    ``phi`` (``phi[i]`` is the index of ``x`` paired with ``y[i]``).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("min_scalar_product needs two vectors of equal length")
    t = x.size
    if t == 0:
        return 0.0, np.zeros(0, dtype=np.int64)
    # canonical opposite-order pairing fixes, per distinct y value, the multiset of x values
    order_y = np.argsort(-y, kind="stable")
    xs = np.sort(x, kind="stable")
    need: dict[float, dict[float, int]] = defaultdict(lambda: defaultdict(int))
    for pos, xv in zip(order_y, xs):
        need[y[pos]][xv] += 1
    by_value: dict[float, deque] = defaultdict(deque)
    for j in np.argsort(x, kind="stable"):
        by_value[x[j]].append(int(j))
    # per y-class heap of (head index of an x-value queue, x value); stale heads refreshed lazily
    heaps: dict[float, list] = {}
    for yv, counts in need.items():
        h = [(by_value[xv][0], xv) for xv in counts]
        heapq.heapify(h)
        heaps[yv] = h
    phi = np.empty(t, dtype=np.int64)
    for i in range(t):
        yv = y[i]
        h = heaps[yv]
        counts = need[yv]
        while True:
            j, xv = heapq.heappop(h)
            if counts[xv] == 0:
                continue
            q = by_value[xv]
            if q[0] != j:
                heapq.heappush(h, (q[0], xv))
                continue
            break
        q.popleft()
        counts[xv] -= 1
        phi[i] = j
        if counts[xv] > 0:
            heapq.heappush(h, (q[0], xv))
    value = float(np.dot(x[phi], y))
    return value, phi


def hw_minimizer(C, D) -> tuple[float, np.ndarray]:
    """Constructive minimiser of ``trace C X D X^T`` over ``X^T X = I_k``.

    Pairs eigenvalues by the minimal scalar product of ``lambda(C)`` with
    ``(lambda(D), 0)`` and returns the optimal value and ``X = P Q^T``.
    """
    ec = sym_eig_dense(C)
    ed = sym_eig_dense(D)
    n, k = ec.values.size, ed.values.size
    if k > n:
        raise ValueError("need order(D) <= order(C)")
    padded = np.concatenate([ed.values, np.zeros(n - k)])
    value, phi = min_scalar_product(ec.values, padded)
    P = ec.vectors[:, phi[:k]]
    return value, P @ ed.vectors.T


def householder_complement(x) -> np.ndarray:
    """Orthonormal columns spanning the complement of the unit vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    x = x / np.linalg.norm(x)
    v = x.copy()
    v[0] += 1.0 if x[0] >= 0 else -1.0
    v /= np.linalg.norm(v)
    H = np.eye(x.size) - 2.0 * np.outer(v, v)
    return H[:, 1:]


class ProjectionBasis:
    """Implicit ``V`` (``n x (n-1)``, ``V^T V = I``, ``V^T e = 0``) plus dense ``W``.

    ``W`` is ``k x (k-1)`` with ``W^T W = I`` and ``W^T mtilde = 0``.
    """

    def __init__(self, n: int, mtilde, kind: str = "V1"):
        if n < 2:
            raise ValueError("projection basis needs n >= 2")
        if kind not in ("V0", "V1", "dense"):
            raise ValueError(f"unknown basis kind {kind!r}")
        self.n = int(n)
        self.kind = kind
        mtilde = np.asarray(mtilde, dtype=np.float64)
        self.W = householder_complement(mtilde / np.sqrt(self.n))
        if kind == "V0":
            j = np.arange(1, n, dtype=np.float64)
            self.s = np.sqrt(j + j * j)
        elif kind == "V1":
            self._levels = []
            t = 1
            while (1 << t) <= n:
                c = n >> t
                self._levels.append((t, c))
                t += 1
            self.s = np.concatenate([np.full(c, np.sqrt(2.0 ** t)) for t, c in self._levels]) \
                if self._levels else np.zeros(0)
            self._tail = self._completion()
            self.s = np.concatenate([self.s, np.ones(self._tail.shape[1])])
        else:
            v = np.ones(n) / np.sqrt(n)
            self._hv = v.copy()
            self._hv[0] += 1.0
            self._hv /= np.linalg.norm(self._hv)
            self.s = np.ones(n - 1)

    def _completion(self) -> np.ndarray:
        # vectors constant on the binary-digit intervals of n, orthogonal to e
        sizes, start, bounds = [], 0, []
        for t in range(self.n.bit_length() - 1, -1, -1):
            if self.n >> t & 1:
                bounds.append((start, start + (1 << t)))
                sizes.append(1 << t)
                start += 1 << t
        r = len(sizes)
        if r == 1:
            return np.zeros((self.n, 0))
        w = np.sqrt(np.asarray(sizes, dtype=np.float64))
        Cmp = householder_complement(w)
        tail = np.zeros((self.n, r - 1))
        for i, (a, b) in enumerate(bounds):
            tail[a:b, :] = Cmp[i, :] / np.sqrt(b - a)
        return tail

    @staticmethod
    def _pattern(t: int) -> np.ndarray:
        half = 1 << (t - 1)
        return np.concatenate([np.ones(half), -np.ones(half)])

    def apply(self, Z) -> np.ndarray:
        """``V @ Z`` for ``Z`` of shape ``(n-1,)`` or ``(n-1, p)``."""
        Z = np.asarray(Z, dtype=np.float64)
        vec = Z.ndim == 1
        Z2 = Z[:, None] if vec else Z
        n, p = self.n, Z2.shape[1]
        if Z2.shape[0] != n - 1:
            raise ValueError("dimension mismatch in V @ Z")
        if self.kind == "V0":
            u = Z2 / self.s[:, None]
            out = np.zeros((n, p))
            # row i gets sum_{j >= i} u_j (1-based columns j >= row) minus (i-1) u_{i-1}
            rc = np.cumsum(u[::-1], axis=0)[::-1]
            out[: n - 1] += rc
            out[1:] -= np.arange(1, n, dtype=np.float64)[:, None] * u
        elif self.kind == "V1":
            u = Z2 / self.s[:, None]
            out = np.zeros((n, p))
            off = 0
            for t, c in self._levels:
                blk = u[off: off + c]
                pat = self._pattern(t)
                out[: c << t] += (blk[:, None, :] * pat[None, :, None]).reshape(c << t, p)
                off += c
            if self._tail.shape[1]:
                out += self._tail @ u[off:]
        else:
            y = np.vstack([np.zeros((1, p)), Z2])
            out = y - 2.0 * np.outer(self._hv, self._hv @ y)
        return out[:, 0] if vec else out

    def apply_t(self, Y) -> np.ndarray:
        """``V^T @ Y`` for ``Y`` of shape ``(n,)`` or ``(n, p)``."""
        Y = np.asarray(Y, dtype=np.float64)
        vec = Y.ndim == 1
        Y2 = Y[:, None] if vec else Y
        n, p = self.n, Y2.shape[1]
        if Y2.shape[0] != n:
            raise ValueError("dimension mismatch in V^T @ Y")
        if self.kind == "V0":
            cs = np.cumsum(Y2, axis=0)[: n - 1]
            out = cs - np.arange(1, n, dtype=np.float64)[:, None] * Y2[1:]
            out /= self.s[:, None]
        elif self.kind == "V1":
            parts = []
            for t, c in self._levels:
                pat = self._pattern(t)
                blk = Y2[: c << t].reshape(c, 1 << t, p)
                parts.append(np.einsum("cjp,j->cp", blk, pat))
            if self._tail.shape[1]:
                parts.append(self._tail.T @ Y2)
            out = np.vstack(parts) / self.s[:, None]
        else:
            out = (Y2 - 2.0 * np.outer(self._hv, self._hv @ Y2))[1:]
        return out[:, 0] if vec else out

    def matrix(self, force: bool = False) -> np.ndarray:
        if self.n > 2000 and not force:
            raise ValueError("refusing to materialise V for n > 2000")
        return self.apply(np.eye(self.n - 1))

    def project(self, G) -> LinearOperator:
        """``V^T G V`` as an implicit operator of size ``n-1``."""
        Gop = _as_operator(G)
        t = self.n - 1

        def mv(z):
            return self.apply_t(Gop.matvec(self.apply(np.ravel(z))))

        def mm(Z):
            return self.apply_t(Gop.matmat(self.apply(Z)))

        return LinearOperator((t, t), matvec=mv, matmat=mm, rmatvec=mv, dtype=np.float64)


def build_basis(n: int, mtilde, kind: str = "V1") -> ProjectionBasis:
    return ProjectionBasis(n, mtilde, kind)
