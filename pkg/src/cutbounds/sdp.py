"""Facially reduced SDP relaxation with a gangster constraint, solved by dual ADMM.

Index conventions: the lifted matrix ``Y`` of order ``kn+1`` has row/column
``0`` for the homogenising coordinate followed by ``vec(X)`` stacked column by
column, so block ``p`` (0-based) occupies rows ``1 + p n .. (p+1) n``.

The problem solved is

    min <C, Z>   s.t.  <A_l, Z> = b_l  (l in Jbar),  Z psd,

with ``C = 1/2 Vhat^T L_G Vhat`` and ``A_l = Vhat^T sym(E_ij) Vhat`` for
``(i, j) in Jbar``; ``b = (1, 0, ..., 0)``.  The dual multipliers ``y`` map to
the matrix ``W = 2 sum_l y_l sym(E_l)`` supported on ``Jbar``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .graph import Graph, SizeVector, b_matrix, objective_matrix

SDP_LIMIT = 2000


@dataclass(eq=False)
class SdpData:
    n: int
    k: int
    m: SizeVector
    LG: sp.csr_matrix
    D1: sp.csr_matrix
    D2: sp.csr_matrix
    J: tuple[np.ndarray, np.ndarray]
    Vhat: sp.csr_matrix
    C: np.ndarray = field(repr=False)

    @property
    def Jbar(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.concatenate([[0], self.J[0]]), np.concatenate([[0], self.J[1]]))

    @property
    def order(self) -> int:
        return self.Vhat.shape[1]

    def lift(self, Z) -> np.ndarray:
        """``Y = Vhat Z Vhat^T``."""
        VZ = self.Vhat @ np.asarray(Z, dtype=np.float64)
        return np.asarray(self.Vhat @ VZ.T).T

    def op(self, Z) -> np.ndarray:
        """``A(Z)``: entries of ``Vhat Z Vhat^T`` on ``Jbar``."""
        I, Jc = self.Jbar
        Y = self.lift(Z)
        return Y[I, Jc]

    def gangster_matrix(self, w) -> sp.csr_matrix:
        """Symmetric matrix carrying ``w_l`` on ``(i, j)`` and ``(j, i)`` for ``l in Jbar``."""
        I, Jc = self.Jbar
        N = self.n * self.k + 1
        rows = np.concatenate([I, Jc[1:]])
        cols = np.concatenate([Jc, I[1:]])
        vals = np.concatenate([w, w[1:]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    def adj(self, y) -> np.ndarray:
        """``A^*(y) = Vhat^T (sum_l y_l sym(E_l)) Vhat``."""
        y = np.asarray(y, dtype=np.float64)
        w = np.concatenate([[y[0]], 0.5 * y[1:]])
        Wm = self.gangster_matrix(w)
        T = (Wm @ self.Vhat).toarray()
        return np.asarray(self.Vhat.T @ T)


def _vj(j: int) -> sp.csr_matrix:
    return sp.vstack([sp.identity(j - 1, format="csr"),
                      sp.csr_matrix(-np.ones((1, j - 1)))]).tocsr()


def build_vhat(m: SizeVector) -> sp.csr_matrix:
    n, k = m.n, m.k
    first = sp.csr_matrix(np.concatenate([[1.0], np.repeat(m.array / n, n)])[:, None])
    body = sp.kron(_vj(k), _vj(n), format="csr")
    body = sp.vstack([sp.csr_matrix((1, body.shape[1])), body])
    return sp.hstack([first, body]).tocsr()


def gangster_indices(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = [], []
    q = np.arange(n)
    for p in range(k):
        for r in range(p + 1, k):
            rows.append(1 + p * n + q)
            cols.append(1 + r * n + q)
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64)


def build_sdp_data(g: Graph, m: SizeVector, d=None, limit: int = SDP_LIMIT) -> SdpData:
    n, k = g.n, m.k
    if m.n != n:
        raise ValueError(f"sizes sum to {m.n} but the graph has {n} nodes")
    if n * k > limit:
        raise ValueError(f"SDP size guard: n*k = {n * k} exceeds {limit}")
    d = np.zeros(n) if d is None else np.asarray(d, dtype=np.float64)
    G = objective_matrix(g, d, sparse=True)
    LG = sp.block_diag([sp.csr_matrix((1, 1)), sp.kron(b_matrix(k), G)], format="csr")
    ek = np.ones((k, 1))
    en = np.ones((n, 1))
    mv = m.array[:, None]
    D1 = sp.bmat([[sp.csr_matrix([[float(n)]]), sp.csr_matrix(-np.kron(ek, en).T)],
                  [sp.csr_matrix(-np.kron(ek, en)), sp.kron(ek @ ek.T, sp.identity(n))]]).tocsr()
    D2 = sp.bmat([[sp.csr_matrix([[float(m.array @ m.array)]]), sp.csr_matrix(-np.kron(mv, en).T)],
                  [sp.csr_matrix(-np.kron(mv, en)), sp.kron(sp.identity(k), en @ en.T)]]).tocsr()
    Vhat = build_vhat(m)
    C = 0.5 * (Vhat.T @ (LG @ Vhat)).toarray()
    C = 0.5 * (C + C.T)
    return SdpData(n, k, m, LG, D1, D2, gangster_indices(n, k), Vhat, C)


def slater_point(m: SizeVector) -> np.ndarray:
    """Strictly feasible ``Zhat = diag(1, c (n Diag(mbar) - mbar mbar^T) (x) (n I - E))``."""
    n, k = m.n, m.k
    mbar = m.array[: k - 1]
    left = n * np.diag(mbar) - np.outer(mbar, mbar)
    right = n * np.eye(n - 1) - np.ones((n - 1, n - 1))
    body = np.kron(left, right) / (n * n * (n - 1))
    Z = np.zeros((body.shape[0] + 1,) * 2)
    Z[0, 0] = 1.0
    Z[1:, 1:] = body
    return Z


def lifted_partition(m: SizeVector, X) -> tuple[np.ndarray, np.ndarray]:
    """``(Y_X, Z_X)`` for a partition matrix (or any ``X`` in ``E``)."""
    X = np.asarray(X, dtype=np.float64)
    n, k = m.n, m.k
    x = np.concatenate([[1.0], X.T.ravel()])
    R = (X - np.outer(np.ones(n), m.array) / n)[: n - 1, : k - 1]
    z = np.concatenate([[1.0], R.T.ravel()])
    return np.outer(x, x), np.outer(z, z)


@dataclass(eq=False)
class SdpSolution:
    Z: np.ndarray
    Y: np.ndarray
    y: np.ndarray
    primalValue: float
    certifiedLowerBound: float
    residuals: dict
    iterations: int
    converged: bool
    seconds: float = 0.0


def _psd_split(Vm: np.ndarray):
    w, U = np.linalg.eigh(Vm)
    pos = w > 0
    Up = U[:, pos] * w[pos]
    Sp = Up @ U[:, pos].T
    Un = U[:, ~pos] * (-w[~pos])
    Zn = Un @ U[:, ~pos].T
    return Sp, Zn, w


def solve_sdp(data: SdpData, tol: float = 1e-5, max_iters: int = 20000, mu: float = 1.0,
              Z0=None, trace=None, trace_every: int = 1, rho: float = 1.6) -> SdpSolution:
    """Dual ADMM (Wen-Goldfarb-Yin) on the facially reduced problem.

    ``rho`` in (0, 1.618) relaxes the multiplier step; the returned ``Z`` is
    the last psd projection.

    ``trace``: optional path or text stream receiving CSV rows
    ``iteration,primal_residual,dual_residual,objective``.
    """
    t0 = time.perf_counter()
    I, Jc = data.Jbar
    K = (data.Vhat @ data.Vhat.T).toarray()
    gram = 0.5 * (K[np.ix_(I, I)] * K[np.ix_(Jc, Jc)] + K[np.ix_(I, Jc)] * K[np.ix_(Jc, I)])
    chol = sla.cho_factor(gram)
    b = np.zeros(I.size)
    b[0] = 1.0
    C = data.C
    normC = 1.0 + np.linalg.norm(C)
    Z = slater_point(data.m) if Z0 is None else np.asarray(Z0, dtype=np.float64).copy()
    S = np.zeros_like(C)
    y = np.zeros(I.size)
    writer, fh, own = None, None, False
    if trace is not None:
        if isinstance(trace, str):
            fh, own = open(trace, "w", newline=""), True
        else:
            fh = trace
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "primal_residual", "dual_residual", "objective"])
    converged = False
    it = 0
    pinf = dinf = math.inf
    ratio_hist = []
    try:
        for it in range(1, max_iters + 1):
            AZ = data.op(Z)
            rhs = mu * (b - AZ) + data.op(C - S)
            y = sla.cho_solve(chol, rhs)
            Aty = data.adj(y)
            Vm = C - Aty - mu * Z
            Vm = 0.5 * (Vm + Vm.T)
            S, Zn, _ = _psd_split(Vm)
            Zpsd = Zn / mu
            dinf = mu * np.linalg.norm(Zpsd - Z) / normC
            Z = Zpsd if rho == 1.0 else (1.0 - rho) * Z + rho * Zpsd
            pinf = np.linalg.norm(data.op(Zpsd) - b) / 2.0
            pobj = float(np.sum(C * Zpsd))
            if writer is not None and it % trace_every == 0:
                writer.writerow([it, f"{pinf:.6e}", f"{dinf:.6e}", f"{pobj:.10g}"])
            if max(pinf, dinf) <= tol:
                converged = True
                break
            ratio_hist.append(pinf / max(dinf, 1e-300))
            if it % 50 == 0:
                r = float(np.median(ratio_hist))
                if r > 2.0:
                    mu *= 2.0
                elif r < 0.5:
                    mu *= 0.5
                ratio_hist.clear()
    finally:
        if own:
            fh.close()
    if it > 0:
        Z = Zpsd
    Y = data.lift(Z)
    cert = _certify_from_y(data, y)
    sol = SdpSolution(Z, Y, y, float(np.sum(C * Z)), cert, {}, it, converged)
    sol.residuals = verify_redundancy(sol, data)["residuals"]
    sol.seconds = time.perf_counter() - t0
    return sol


def _vtv_min_eig() -> float:
    # Vhat^T Vhat = diag(1 + |m|^2/n, (I + ee^T) (x) (I + ee^T)), whose smallest eigenvalue is 1
    return 1.0


def _certify_from_y(data: SdpData, y) -> float:
    slack = data.C - data.adj(y)
    lmin = float(np.linalg.eigvalsh(0.5 * (slack + slack.T))[0])
    # for feasible Z: <C, Z> = y_0 + <slack, Z> >= y_0 + lmin * tr Z and tr Z <= (n + 1) / lmin(Vhat^T Vhat)
    return float(y[0]) + min(0.0, lmin) * (data.n + 1) / _vtv_min_eig()


def certify_lower_bound(data: SdpData, W) -> float:
    """Valid lower bound on the SDP value from any dual estimate ``W``.

    ``W`` is first restricted to ``Jbar``.  Returns ``W_00 / 2`` when the slack
    ``Vhat^T (L_G - W) Vhat`` is psd, otherwise the trace-repaired value.
    """
    W = W.toarray() if sp.issparse(W) else np.asarray(W, dtype=np.float64)
    I, Jc = data.Jbar
    # y_0 = W_00 / 2 and y_l = W_ij for the off-diagonal entries
    y = np.concatenate([[0.5 * W[0, 0]], 0.5 * (W[I[1:], Jc[1:]] + W[Jc[1:], I[1:]])])
    return _certify_from_y(data, y)


def dual_matrix(data: SdpData, y) -> sp.csr_matrix:
    """``W = 2 sum_l y_l sym(E_l)``."""
    y = np.asarray(y, dtype=np.float64)
    return data.gangster_matrix(np.concatenate([[2.0 * y[0]], y[1:]]))


def verify_redundancy(sol: SdpSolution, data: SdpData, tol: float = 1e-5) -> dict:
    Y = sol.Y
    n, k = data.n, data.k
    I, Jc = data.Jbar
    target = np.zeros(I.size)
    target[0] = 1.0
    res = {"gangster": float(np.max(np.abs(Y[I, Jc] - target)))}
    zmin = float(np.linalg.eigvalsh(0.5 * (sol.Z + sol.Z.T))[0])
    res["psd"] = max(0.0, -zmin)
    arrow = np.diag(Y) - np.concatenate([[0.0], Y[0, 1:]])
    arrow[0] -= 1.0
    res["arrow"] = float(np.max(np.abs(arrow)))
    Yb = Y[1:, 1:].reshape(k, n, k, n)
    DO = np.einsum("aibi->ab", Yb)
    res["DO"] = float(np.max(np.abs(DO - np.diag(data.m.array))))
    De = np.einsum("aiai->i", Yb)
    res["De"] = float(np.max(np.abs(De - 1.0)))
    res["D1"] = abs(float(data.D1.multiply(Y).sum()))
    res["D2"] = abs(float(data.D2.multiply(Y).sum()))
    ok = all(v <= 10 * tol for v in res.values())
    return {"residuals": res, "pass": ok}


def recover_candidates(sol: SdpSolution, data: SdpData):
    """``X1 = Mat(Y[1:, 0]) / Y_00`` and, when the top eigenvector has ``|v_0| > 1e-8``, ``X2 = Mat(v[1:] / v_0)``.

    Returns ``(X1, X2, info)``; ``X2`` is ``None`` when omitted.
    """
    n, k = data.n, data.k
    Y = sol.Y
    # dividing by Y_00 (= 1 at feasibility) puts X1 exactly in E
    X1 = Y[1:, 0].reshape(k, n).T / Y[0, 0]
    w, U = np.linalg.eigh(0.5 * (Y + Y.T))
    v = U[:, -1]
    info = {"v0": float(v[0]), "X2_nonneg_certified": False}
    X2 = None
    if abs(v[0]) > 1e-8:
        X2 = (v[1:] / v[0]).reshape(k, n).T.copy()
        info["X2_nonneg_certified"] = bool(Y.min() >= -1e-8)
    else:
        info["notice"] = "top eigenvector has negligible first component; X2 omitted"
    return X1, X2, info
