from __future__ import annotations

import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import ortho_group

from cutbounds.graph import Graph, SizeVector, model_matrices
from cutbounds.spectral import (
    EigenSolverError, ProjectionBasis, build_basis, extremal_eigs, householder_complement,
    hw_minimizer, min_scalar_product, sym_eig_dense,
)

from conftest import brute_msp, random_graph

KINDS = ("V0", "V1", "dense")


def test_sym_eig_dense_examples(k3):
    assert np.allclose(sym_eig_dense(model_matrices(SizeVector((1, 1, 1))).Btilde).values, [1, 0, -1])
    assert np.allclose(sym_eig_dense(np.eye(3)).values, [1, 1, 1])
    assert np.allclose(sym_eig_dense(k3.adjacency.toarray()).values, [2, -1, -1])


def test_sym_eig_dense_contract(rng):
    S = rng.standard_normal((30, 30))
    S = S + S.T
    dec = sym_eig_dense(S)
    assert np.all(np.diff(dec.values) <= 0)
    assert np.allclose(dec.vectors.T @ dec.vectors, np.eye(30), atol=1e-12)
    res = np.linalg.norm(S @ dec.vectors - dec.vectors * dec.values, axis=0)
    assert res.max() <= 1e-8 * np.linalg.norm(S, 2)
    again = sym_eig_dense(S.copy())
    assert np.array_equal(again.values, dec.values) and np.array_equal(again.vectors, dec.vectors)
    with pytest.raises(ValueError):
        sym_eig_dense(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_extremal_diagonal_lanczos():
    D = sp.diags(np.arange(1.0, 301.0))
    top, bot = extremal_eigs(D, 2, 1)
    assert np.allclose(top.values, [300, 299], atol=1e-6)
    assert np.allclose(bot.values, [1], atol=1e-6)
    top, bot = extremal_eigs(sp.diags(np.arange(1.0, 101.0)), 2, 1)
    assert np.allclose(top.values, [100, 99]) and np.allclose(bot.values, [1])


def test_extremal_k3_dense_fallback(k3):
    top, bot = extremal_eigs(k3.adjacency, 1, 1)
    assert top.values[0] == pytest.approx(2) and bot.values[0] == pytest.approx(-1)


def test_extremal_projected_p3(p3):
    basis = build_basis(3, np.ones(3), "V0")
    op = basis.project(p3.adjacency)
    V = basis.matrix()
    dense = np.linalg.eigvalsh(V.T @ p3.adjacency.toarray() @ V)
    top, bot = extremal_eigs(op, 1, 1)
    assert top.values[0] == pytest.approx(dense[-1], abs=1e-8)
    assert bot.values[0] == pytest.approx(dense[0], abs=1e-8)


def test_extremal_lanczos_vs_dense(rng):
    g = random_graph(400, 0.05, rng)
    A = g.adjacency.toarray()
    full = np.linalg.eigvalsh(A)
    top, bot = extremal_eigs(g.adjacency, 3, 2, tol=1e-10)
    assert np.allclose(top.values, full[::-1][:3], atol=1e-7)
    assert np.allclose(bot.values, full[:2][::-1], atol=1e-7)
    for vals, vecs in ((top.values, top.vectors), (bot.values, bot.vectors)):
        res = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
        assert res.max() <= 1e-7 * np.abs(full).max()


def test_extremal_repeated_eigenvalues():
    """Two disjoint copies of the same graph: every eigenvalue is doubled."""
    rng = np.random.default_rng(3)
    g = random_graph(150, 0.1, rng)
    A = g.adjacency
    big = sp.block_diag([A, A]).tocsr()
    full = np.linalg.eigvalsh(big.toarray())
    top, bot = extremal_eigs(big, 2, 2, tol=1e-10)
    assert np.allclose(top.values, full[::-1][:2], atol=1e-7)
    assert np.allclose(bot.values, full[:2][::-1], atol=1e-7)


def test_extremal_bad_request(k3):
    with pytest.raises(ValueError):
        extremal_eigs(k3.adjacency, 3, 1)


def test_extremal_nonconvergence_reports_residual():
    rng = np.random.default_rng(0)
    S = rng.standard_normal((300, 300))
    S = S + S.T
    with pytest.raises(EigenSolverError) as info:
        extremal_eigs(S, 3, 3, tol=1e-14, max_restarts=1, dense_cutoff=10)
    assert info.value.residual > 0


def test_msp_examples():
    assert min_scalar_product([1, 2], [3, 4])[0] == 10
    val, phi = min_scalar_product([2, -1, -1], [1, 0, -1])
    assert val == -3 == brute_msp([2, -1, -1], [1, 0, -1])
    assert np.dot(np.array([2, -1, -1])[phi], [1, 0, -1]) == -3
    assert min_scalar_product(np.arange(5.0), np.zeros(5))[0] == 0
    with pytest.raises(ValueError):
        min_scalar_product([1, 2], [1])


def _brute_msp_lex(x, y):
    best, arg = None, None
    for p in itertools.permutations(range(len(x))):
        v = sum(x[p[i]] * y[i] for i in range(len(y)))
        if best is None or v < best - 1e-12:
            best, arg = v, p
    return best, arg


def test_msp_brute_force_with_ties(rng):
    """200 random trials, small integer entries so ties are frequent."""
    for _ in range(200):
        t = int(rng.integers(1, 8))
        x = rng.integers(-3, 4, size=t).astype(float)
        y = rng.integers(-3, 4, size=t).astype(float)
        val, phi = min_scalar_product(x, y)
        best, arg = _brute_msp_lex(x, y)
        assert val == best
        assert tuple(phi) == arg


def test_msp_brute_force_continuous(rng):
    for _ in range(50):
        t = int(rng.integers(1, 8))
        x, y = rng.standard_normal(t), rng.standard_normal(t)
        assert min_scalar_product(x, y)[0] == pytest.approx(brute_msp(x, y), abs=1e-12)


def test_hoffman_wielandt(rng):
    for _ in range(30):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, min(n, 3) + 1))
        C = rng.standard_normal((n, n))
        C = C + C.T
        D = rng.standard_normal((k, k))
        D = D + D.T
        value, X = hw_minimizer(C, D)
        lc, ld = np.linalg.eigvalsh(C), np.linalg.eigvalsh(D)
        assert value == pytest.approx(brute_msp(lc, np.concatenate([ld, np.zeros(n - k)])), abs=1e-10)
        assert np.allclose(X.T @ X, np.eye(k), atol=1e-10)
        assert np.trace(C @ X @ D @ X.T) == pytest.approx(value, abs=1e-8)
        # no sampled orthonormal X does better
        for _ in range(50):
            Q = ortho_group.rvs(n, random_state=rng)[:, :k] if n > 1 else np.ones((1, 1))
            assert np.trace(C @ Q @ D @ Q.T) >= value - 1e-8


def test_householder_complement(rng):
    x = rng.standard_normal(7)
    W = householder_complement(x)
    assert np.allclose(W.T @ W, np.eye(6), atol=1e-12)
    assert np.allclose(W.T @ x, 0, atol=1e-12)


def test_v0_pattern_n3():
    b = build_basis(3, np.ones(3), "V0")
    assert np.allclose(b.s, [np.sqrt(2), np.sqrt(6)])
    raw = b.matrix() * b.s
    assert np.allclose(raw[:, 0], [1, -1, 0])
    assert np.allclose(raw[:, 1], [1, 1, -2])


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [2, 3, 7, 16, 33, 100])
def test_basis_orthonormal(kind, n, rng):
    mt = np.sqrt(rng.integers(1, 9, size=4).astype(float))
    b = build_basis(n, mt, kind)
    V = b.matrix()
    assert np.allclose(V.T @ V, np.eye(n - 1), atol=1e-12)
    assert np.linalg.norm(V.T @ np.ones(n)) <= 1e-12 * n
    z = rng.standard_normal((n - 1, 3))
    y = rng.standard_normal((n, 3))
    assert np.allclose(b.apply(z), V @ z, atol=1e-12)
    assert np.allclose(b.apply_t(y), V.T @ y, atol=1e-12)
    assert np.linalg.norm(b.apply_t(np.ones(n))) <= 1e-12 * n
    assert np.allclose(b.W.T @ b.W, np.eye(3), atol=1e-12)
    assert np.allclose(b.W.T @ mt, 0, atol=1e-12)
    P = np.column_stack([np.ones(n) / np.sqrt(n), V])
    assert np.allclose(P.T @ P, np.eye(n), atol=1e-12)


def test_pq_orthogonal():
    m = SizeVector((3, 4, 5))
    mt = np.sqrt(m.array)
    b = build_basis(12, mt, "V1")
    Q = np.column_stack([mt / np.sqrt(12), b.W])
    assert np.allclose(Q.T @ Q, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("n", [1000, 5000])
def test_basis_large_probes(n, rng):
    mt = np.sqrt(np.array([3.0, 5.0, 7.0]))
    for kind in ("V0", "V1"):
        b = build_basis(n, mt, kind)
        z = rng.standard_normal(n - 1)
        vz = b.apply(z)
        assert abs(vz.sum()) <= 1e-12 * n * np.abs(z).max() * 10
        assert np.linalg.norm(vz) == pytest.approx(np.linalg.norm(z), rel=1e-12)
        assert np.allclose(b.apply_t(vz), z, atol=1e-10)
    with pytest.raises(ValueError):
        ProjectionBasis(3000, mt, "V0").matrix()


def test_projected_laplacian_spectrum(rng):
    for _ in range(10):
        n = int(rng.integers(4, 31))
        g = random_graph(n, 0.4, rng)
        L = g.laplacian().toarray()
        w, U = np.linalg.eigh(L)
        # eigenvalues of L on eigenvectors orthogonal to e: drop one copy of the e-eigenvalue 0
        idx = int(np.argmax(np.abs(U.T @ np.ones(n))))
        keep = np.delete(w, idx)
        for kind in KINDS:
            V = build_basis(n, np.ones(3), kind).matrix()
            assert np.allclose(np.linalg.eigvalsh(V.T @ L @ V), keep, atol=1e-9)


def test_bhat_interlacing(rng):
    for _ in range(50):
        k = int(rng.integers(3, 8))
        m = SizeVector(tuple(int(x) for x in rng.integers(1, 40, size=k)))
        mm = model_matrices(m)
        W = build_basis(m.n, mm.mtilde, "V1").W
        Bhat = W.T @ mm.Btilde @ W
        lt = np.linalg.eigvalsh(mm.Btilde)
        lh = np.linalg.eigvalsh(Bhat)
        assert lt[0] - 1e-9 <= lh[0] and lh[-1] <= lt[-1] + 1e-9
        # Cauchy interlacing for a corank-one compression
        assert np.all(lt[:-1] <= lh + 1e-9) and np.all(lh <= lt[1:] + 1e-9)
