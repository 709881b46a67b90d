"""Convex QP lower bound: dual LP lift, implicit operators and a certified Frank-Wolfe solve.

With ``lam, U1`` the spectrum of ``Bhat`` and ``sigma, U2`` that of ``Ghat``,
the optimal LP multipliers ``(t, s)`` give ``T* = U1 diag(t) U1^T`` and
``S* = U2 diag(s) U2^T``.  The operator

    Qhat(Z)   = Ghat Z Bhat - S* Z - Z T*

is diagonal in the basis ``U2 (.) U1^T`` with entries
``lam_i sigma_j - t_i - s_j >= 0``.  In the original coordinates

    Qtilde(X) = G X B - (V S* V^T) X M^-1 - X Mt^-1 W T* W^T Mt^-1

and the bound minimises ``1/2 <X, Qtilde X> + dualValue`` over ``D``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .eig import BoundResult, ProjectedPieces
from .graph import Graph, SizeVector, model_matrices
from .lp import dual_lp_solve, transport_solve
from .spectral import min_scalar_product, sym_eig_dense

QP_DENSE_LIMIT = 2000


@dataclass(eq=False)
class DualPair:
    sStar: np.ndarray
    tStar: np.ndarray
    SStar: np.ndarray
    TStar: np.ndarray
    dualValue: float
    lam: np.ndarray
    U1: np.ndarray
    sigma: np.ndarray
    U2: np.ndarray

    def qhat_spectrum(self) -> np.ndarray:
        """Eigenvalues of ``Qhat`` as a ``(k-1) x (n-1)`` array."""
        return np.outer(self.lam, self.sigma) - self.tStar[:, None] - self.sStar[None, :]


def build_dual_pair(pieces: ProjectedPieces, limit: int = QP_DENSE_LIMIT) -> DualPair:
    n = pieces.m.n
    if n > limit:
        raise ValueError(f"the QP bound needs the full spectrum of Ghat; n={n} exceeds {limit}")
    V = pieces.basis.matrix(force=True)
    Gh = pieces.basis.apply_t(pieces.G @ V)
    eg = sym_eig_dense(0.5 * (Gh + Gh.T))
    eb = sym_eig_dense(pieces.Bhat)
    lp = dual_lp_solve(eb.values, eg.values)
    s, t = lp.s, lp.t
    S = (eg.vectors * s) @ eg.vectors.T
    T = (eb.vectors * t) @ eb.vectors.T
    dual = DualPair(s, t, S, T, lp.value, eb.values, eb.vectors, eg.values, eg.vectors)
    ref = 0.5 * min_scalar_product(eg.values, np.concatenate([eb.values, np.zeros(n - pieces.m.k)]))[0]
    scale = max(1.0, float(np.max(np.abs(eg.values))) * float(np.max(np.abs(eb.values), initial=0.0)))
    if abs(dual.dualValue - ref) > 1e-8 * scale:
        raise AssertionError("dual value differs from the minimal scalar product")
    if np.max(s, initial=0.0) > 0.0:
        raise AssertionError("S* must be negative semidefinite")
    if dual.qhat_spectrum().min(initial=0.0) < -1e-8 * scale:
        raise AssertionError("dual pair is infeasible: Qhat has a negative eigenvalue")
    return dual


class QpOperators:
    """Implicit ``Qhat`` on ``(n-1) x (k-1)`` and ``Qtilde`` on ``n x k`` matrices."""

    def __init__(self, pieces: ProjectedPieces, dual: DualPair):
        self.pieces = pieces
        self.dual = dual
        mm = model_matrices(pieces.m)
        self.B = mm.B
        self.minv = 1.0 / pieces.m.array
        V = pieces.basis.matrix(force=True)
        self.VSV = V @ dual.SStar @ V.T
        Wm = pieces.basis.W / mm.mtilde[:, None]
        self.Tk = Wm @ dual.TStar @ Wm.T

    def qhat(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        return (self.pieces.Ghat.matmat(Z) @ self.pieces.Bhat
                - self.dual.SStar @ Z - Z @ self.dual.TStar)

    def qtilde(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (self.pieces.G @ X) @ self.B - (self.VSV @ X) * self.minv[None, :] - X @ self.Tk


def qp_lower_bound(g: Graph, m: SizeVector, dual: DualPair, pieces: ProjectedPieces,
                   max_iters: int = 2000, tol: float = 1e-6,
                   ops: QpOperators | None = None) -> BoundResult:
    """Frank-Wolfe on ``min 1/2 <X, Qtilde X> + dualValue`` over ``D`` from ``Xhat``.

    The reported value is ``max_t f(X_t) - gap(X_t)``, a valid lower bound at
    every iteration.  ``info`` carries the objective and gap histories.
    """
    t0 = time.perf_counter()
    if pieces.m != m or g.n != m.n:
        raise ValueError("pieces were built for different sizes")
    ops = ops or QpOperators(pieces, dual)
    X = pieces.Xhat.copy()
    QX = ops.qtilde(X)
    best = -np.inf
    fs, gaps = [], []
    warm = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        f = 0.5 * float(np.sum(X * QX)) + dual.dualValue
        sol = transport_solve(-QX, m, warm_start=warm)
        warm = sol.basis
        S = sol.X.astype(np.float64)
        D = S - X
        gap = max(0.0, -float(np.sum(QX * D)))
        fs.append(f)
        gaps.append(gap)
        best = max(best, f - gap)
        if gap <= tol * max(1.0, abs(f)):
            converged = True
            break
        QD = ops.qtilde(S) - QX
        curv = float(np.sum(D * QD))
        step = 1.0 if curv <= 0.0 else min(1.0, gap / curv)
        X += step * D
        QX += step * QD
    return BoundResult.lower(best, X, "qp", time.perf_counter() - t0,
                             iterations=it, converged=converged, raw=fs[-1], gap=gaps[-1],
                             history_f=np.asarray(fs), history_gap=np.asarray(gaps))
