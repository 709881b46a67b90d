"""Basic and projected eigenvalue lower bounds, the explicit linear term and the gamma sweep."""
from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph, SizeVector, block_partition, model_matrices, objective_matrix
from .spectral import (ProjectionBasis, build_basis, extremal_eigs, min_scalar_product,
                       sym_eig_dense)

# eigenpairs feeding a bound are resolved more tightly than the generic default so that
# bounds computed in different bases agree to 1e-6
BOUND_EIG_TOL = 1e-10
SNAP = 1e-6
MODES = ("adjacency", "negLaplacian")


def ceil_lower(value: float) -> int:
    return int(math.ceil(value - SNAP))


def floor_upper(value: float) -> int:
    return int(math.floor(value + SNAP))


@dataclass(eq=False)
class BoundResult:
    value: float
    rounded: int
    witness: np.ndarray | None
    method: str
    seconds: float
    kind: str = "lower"
    info: dict = field(default_factory=dict)

    @classmethod
    def lower(cls, value, witness, method, seconds, **info):
        return cls(float(value), ceil_lower(value), witness, method, seconds, "lower", info)

    @classmethod
    def upper(cls, value, witness, method, seconds, **info):
        return cls(float(value), floor_upper(value), witness, method, seconds, "upper", info)


@dataclass(eq=False)
class ProjectedPieces:
    alpha: float
    Bhat: np.ndarray
    Ghat: object          # LinearOperator V^T G V
    C: np.ndarray         # (n-1) x (k-1), rank one
    Xhat: np.ndarray
    G: sp.csr_matrix
    d: np.ndarray
    m: SizeVector
    basis: ProjectionBasis

    def lift(self, Z) -> np.ndarray:
        """``X = Xhat + V Z W^T Mtilde``."""
        mt = np.sqrt(self.m.array)
        return self.Xhat + self.basis.apply(Z) @ (self.basis.W.T * mt[None, :])

    def coords(self, X) -> np.ndarray:
        """Inverse of :meth:`lift` for ``X`` in ``E``."""
        mt = np.sqrt(self.m.array)
        return self.basis.apply_t(np.asarray(X, dtype=np.float64) - self.Xhat) @ (self.basis.W / mt[:, None])


def _default_d(g: Graph, d):
    return np.zeros(g.n) if d is None else np.asarray(d, dtype=np.float64)


def projected_pieces(g: Graph, m: SizeVector, d=None, basis: ProjectionBasis | None = None,
                     check: bool = True, seed: int = 0) -> ProjectedPieces:
    d = _default_d(g, d)
    if m.n != g.n:
        raise ValueError(f"sizes sum to {m.n} but the graph has {g.n} nodes")
    mm = model_matrices(m)
    if basis is None:
        basis = build_basis(g.n, mm.mtilde, "V1")
    if basis.n != g.n or basis.W.shape[0] != m.k:
        raise ValueError("basis was built for a different (n, m)")
    G = objective_matrix(g, d, sparse=True)
    n = g.n
    e = np.ones(n)
    Ge = G @ e
    mv = m.array
    alpha = float(Ge.sum()) * float(mv @ mm.B @ mv) / n ** 2
    W = basis.W
    Bhat = W.T @ mm.Btilde @ W
    Bhat = 0.5 * (Bhat + Bhat.T)
    C = (2.0 / n) * np.outer(basis.apply_t(Ge), W.T @ (mm.mtilde * (mm.B @ mv)))
    Xhat = np.outer(e, mv) / n
    pieces = ProjectedPieces(alpha, Bhat, basis.project(G), C, Xhat, G, d, m, basis)
    if check:
        _check_split(pieces, seed)
    return pieces


def _check_split(p: ProjectedPieces, seed: int) -> None:
    """Verify ``tr GXBX^T = alpha + tr Ghat Z Bhat Z^T + tr C Z^T`` on a random ``X`` in ``E``."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((p.m.n - 1, p.m.k - 1)) / np.sqrt(p.m.n)
    X = p.lift(Z)
    B = model_matrices(p.m).B
    lhs = float(np.sum((p.G @ X) * (X @ B)))
    rhs = p.alpha + float(np.sum(p.Ghat.matmat(Z) * (Z @ p.Bhat))) + float(np.sum(p.C * Z))
    if abs(lhs - rhs) > 1e-8 * max(1.0, abs(lhs)):
        raise AssertionError(f"objective split mismatch: {lhs!r} vs {rhs!r}")


def basic_eig_bound(g: Graph, m: SizeVector, d=None, tol: float = BOUND_EIG_TOL,
                    seed: int = 0) -> BoundResult:
    t0 = time.perf_counter()
    d = _default_d(g, d)
    k = m.k
    bt = sym_eig_dense(model_matrices(m).Btilde).values
    G = objective_matrix(g, d, sparse=True)
    top, bot = extremal_eigs(G, k - 2, 1, tol=tol, seed=seed)
    value = 0.5 * (float(np.dot(bt[k - 1:0:-1][: k - 2], top.values)) + bt[0] * bot.values[-1])
    return BoundResult.lower(value, None, "eig_basic", time.perf_counter() - t0)


def linear_term_min(g: Graph, m: SizeVector, d=None) -> tuple[float, np.ndarray]:
    """``min over partitions of tr G Xhat B X^T`` and a minimising partition matrix."""
    d = _default_d(g, d)
    n = g.n
    Ge = objective_matrix(g, d, sparse=True) @ np.ones(n)
    v0 = _v0(m)
    value, phi = min_scalar_product(Ge, v0)
    labels = np.empty(n, dtype=np.int64)
    labels[phi] = np.repeat(np.arange(m.k), m.m)
    X = np.zeros((n, m.k), dtype=np.int64)
    X[np.arange(n), labels] = 1
    return value / n, X


def _v0(m: SizeVector) -> np.ndarray:
    mv = np.asarray(m.m)
    reps = [np.full(mv[i], float(m.n - mv[-1] - mv[i])) for i in range(m.k - 1)]
    return np.concatenate(reps + [np.zeros(mv[-1])])


def projected_eig_bound(g: Graph, m: SizeVector, mode: str = "adjacency",
                        basis: ProjectionBasis | str | None = None, d=None,
                        tol: float = BOUND_EIG_TOL, seed: int = 0) -> BoundResult:
    """Projected eigenvalue bound in adjacency (``G = A - Diag d``) or -L mode.

    In adjacency mode ``d`` defaults to zero; in negLaplacian mode it is
    forced to the degree vector.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    t0 = time.perf_counter()
    if mode == "negLaplacian":
        d = g.degrees
    if basis is None or isinstance(basis, str):
        basis = build_basis(g.n, np.sqrt(m.array), basis or "V1")
    p = projected_pieces(g, m, d, basis, seed=seed)
    k = m.k
    lb = sym_eig_dense(p.Bhat)  # nonincreasing
    top, bot = extremal_eigs(p.Ghat, k - 2, 1, tol=tol, seed=seed)
    # negative B-hat eigenvalues against the largest G-hat ones, lambda_1(B-hat) against the smallest
    quad = float(np.dot(lb.values[:0:-1], top.values)) + lb.values[0] * bot.values[-1]
    if mode == "negLaplacian":
        value = 0.5 * quad
        lin = 0.0
    else:
        lin, _ = linear_term_min(g, m, d)
        value = 0.5 * (-p.alpha + quad + 2.0 * lin)
    PG = np.column_stack([top.vectors, bot.vectors[:, -1:]])
    Q = lb.vectors[:, ::-1]  # B-hat eigenvectors, eigenvalues nondecreasing
    Z = PG @ Q.T
    X = p.lift(Z)
    method = "eigA" if mode == "adjacency" else "eigL"
    return BoundResult.lower(value, X, method, time.perf_counter() - t0,
                             alpha=p.alpha, quadratic=0.5 * quad, linear=lin, basis=basis.kind)


def gamma_sweep(g: Graph, m: SizeVector, d, grid, basis: ProjectionBasis | str | None = None,
                tol: float = BOUND_EIG_TOL, seed: int = 0) -> list[tuple[float, float]]:
    """Projected adjacency-mode bound of ``A - gamma Diag(d)`` for each ``gamma``."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (g.n,):
        raise ValueError(f"d must have length {g.n}")
    if basis is None or isinstance(basis, str):
        basis = build_basis(g.n, np.sqrt(m.array), basis or "V1")
    out = []
    for gamma in grid:
        gamma = float(gamma)
        if not math.isfinite(gamma):
            raise ValueError("gamma grid must be finite")
        r = projected_eig_bound(g, m, "adjacency", basis, gamma * d, tol=tol, seed=seed)
        out.append((gamma, r.value))
    return out


def sweep_csv(curve) -> str:
    buf = io.StringIO()
    buf.write("gamma,bound\n")
    for gamma, value in curve:
        buf.write(f"{gamma:.6g},{value:.10g}\n")
    return buf.getvalue()
