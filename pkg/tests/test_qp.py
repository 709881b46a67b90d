from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import null_space

from cutbounds.eig import projected_eig_bound, projected_pieces
from cutbounds.graph import SizeVector, membership
from cutbounds.qp import QpOperators, build_dual_pair, qp_lower_bound
from cutbounds.spectral import build_basis

from conftest import all_labelings, brute_cut, random_graph, random_in_E, random_sizes_sum


def _setup(g, m, d=None, kind="V1"):
    basis = build_basis(g.n, np.sqrt(m.array), kind)
    p = projected_pieces(g, m, d, basis)
    dual = build_dual_pair(p)
    return p, dual, QpOperators(p, dual)


def _f(ops, X):
    return 0.5 * float(np.sum(X * ops.qtilde(X))) + ops.dual.dualValue


def test_dual_pair_laplacian_equals_projeig(rng):
    for _ in range(10):
        n = int(rng.integers(6, 40))
        m = random_sizes_sum(n, int(rng.integers(3, 6)), rng)
        g = random_graph(n, 0.4, rng)
        p, dual, _ = _setup(g, m, g.degrees)
        assert dual.dualValue == pytest.approx(projected_eig_bound(g, m, "negLaplacian").value, abs=1e-8)


def test_dual_pair_invariants(rng):
    g = random_graph(30, 0.3, rng)
    m = SizeVector((8, 12, 10))
    p, dual, _ = _setup(g, m)
    assert np.all(dual.sStar <= 0)
    assert np.linalg.eigvalsh(dual.SStar).max() <= 1e-10
    assert dual.qhat_spectrum().min() >= -1e-8
    assert dual.dualValue == pytest.approx(0.5 * (dual.sStar.sum() + dual.tStar.sum()), abs=1e-12)


def test_dual_pair_zero_bhat():
    """k = 3 with a singleton first set still yields a consistent pair."""
    from cutbounds.graph import Graph
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    p, dual, _ = _setup(g, SizeVector((1, 1, 2)))
    assert dual.qhat_spectrum().min() >= -1e-10


def test_qhat_rayleigh(rng):
    for _ in range(5):
        n = int(rng.integers(8, 40))
        m = random_sizes_sum(n, int(rng.integers(3, 6)), rng)
        g = random_graph(n, 0.5, rng)
        p, dual, ops = _setup(g, m, rng.standard_normal(n))
        for _ in range(20):
            Z = rng.standard_normal((n - 1, m.k - 1))
            assert np.sum(Z * ops.qhat(Z)) / np.sum(Z * Z) >= -1e-8
        # Qtilde is psd on the tangent space of E
        for _ in range(20):
            T = p.lift(rng.standard_normal((n - 1, m.k - 1))) - p.Xhat
            assert np.sum(T * ops.qtilde(T)) >= -1e-8 * max(1.0, np.sum(T * T))


def test_quadratic_forms_agree(rng):
    for kind in ("V0", "V1", "dense"):
        g = random_graph(20, 0.4, rng)
        m = SizeVector((5, 7, 8))
        p, dual, ops = _setup(g, m, None, kind)
        for _ in range(5):
            X = random_in_E(m, rng)
            Z = p.coords(X)
            D = X - p.Xhat
            lhs = float(np.sum(D * ops.qtilde(D)))
            rhs = float(np.sum(Z * ops.qhat(Z)))
            assert lhs == pytest.approx(rhs, abs=1e-8 * max(1.0, abs(lhs)))


def test_relaxation_below_every_partition(rng):
    """The QP objective never exceeds the cut on partition matrices."""
    for _ in range(20):
        n = int(rng.integers(4, 9))
        m = random_sizes_sum(n, 3, rng)
        g = random_graph(n, rng.random(), rng)
        _, _, ops = _setup(g, m)
        edges = g.edges.tolist()
        for lab in all_labelings(m):
            X = np.eye(3)[list(lab)]
            assert _f(ops, X) <= brute_cut(edges, lab, 3) + 1e-8


def _qp_reference(ops, m):
    """The convex QP over D solved by an interior-point method (cvxopt).

    Variables are reduced to the null space of the marginal constraints so the
    Hessian is positive semidefinite there.
    """
    cvxopt = pytest.importorskip("cvxopt")
    n, k = m.n, m.k
    Q = np.column_stack([ops.qtilde(e.reshape(n, k)).ravel() for e in np.eye(n * k)])
    A = np.vstack([np.kron(np.eye(n), np.ones(k)), np.kron(np.ones(n), np.eye(k))])
    N = null_space(A)
    x0 = ops.pieces.Xhat.ravel()
    P = N.T @ Q @ N
    opts = {"show_progress": False, "abstol": 1e-11, "reltol": 1e-11, "feastol": 1e-11}
    sol = cvxopt.solvers.qp(cvxopt.matrix(0.5 * (P + P.T)), cvxopt.matrix(N.T @ Q @ x0),
                            cvxopt.matrix(-N), cvxopt.matrix(x0), options=opts)
    x = x0 + N @ np.array(sol["x"]).ravel()
    return 0.5 * float(x @ Q @ x) + ops.dual.dualValue


def test_fw_matches_reference_qp(rng):
    for _ in range(8):
        n = int(rng.integers(5, 11))
        m = random_sizes_sum(n, 3, rng)
        g = random_graph(n, rng.random() * 0.7 + 0.2, rng)
        p, dual, ops = _setup(g, m)
        r = qp_lower_bound(g, m, dual, p, max_iters=5000, tol=1e-9, ops=ops)
        ref = _qp_reference(ops, m)
        # certified value <= optimum <= value at the feasible FW iterate
        assert r.value <= ref + 1e-7
        assert r.info["raw"] >= ref - 1e-7
        assert r.value >= ref - 2e-3


def test_fw_properties(rng):
    for _ in range(5):
        n = int(rng.integers(10, 40))
        m = random_sizes_sum(n, int(rng.integers(3, 6)), rng)
        g = random_graph(n, 0.4, rng)
        p, dual, ops = _setup(g, m)
        r = qp_lower_bound(g, m, dual, p, max_iters=300)
        fs, gaps = r.info["history_f"], r.info["history_gap"]
        assert np.all(np.diff(fs) <= 1e-9 * max(1.0, np.abs(fs).max()))
        assert np.all(gaps >= 0)
        assert r.value == pytest.approx(np.max(fs - gaps))
        assert r.value >= projected_eig_bound(g, m, "adjacency").value - 1e-6
        X = r.witness
        assert membership(X, m, "E")[1] <= 1e-8 and X.min() >= -1e-12


def test_qp_laplacian_converges_to_projeig(rng):
    g = random_graph(30, 0.3, rng)
    m = SizeVector((9, 10, 11))
    p, dual, _ = _setup(g, m, g.degrees)
    r = qp_lower_bound(g, m, dual, p)
    assert r.info["converged"]
    assert r.value == pytest.approx(projected_eig_bound(g, m, "negLaplacian").value, abs=1e-6)


def test_qp_below_true_cut(rng):
    for _ in range(15):
        n = int(rng.integers(5, 10))
        m = random_sizes_sum(n, 3, rng)
        g = random_graph(n, rng.random(), rng)
        p, dual, _ = _setup(g, m)
        truth = min(brute_cut(g.edges.tolist(), lab, 3) for lab in all_labelings(m))
        assert qp_lower_bound(g, m, dual, p).value <= truth + 1e-9


def test_size_guards(rng):
    g = random_graph(30, 0.2, rng)
    m = SizeVector((10, 10, 10))
    p = projected_pieces(g, m)
    with pytest.raises(ValueError):
        build_dual_pair(p, limit=20)
    dual = build_dual_pair(p)
    with pytest.raises(ValueError):
        qp_lower_bound(g, SizeVector((9, 11, 10)), dual, p)


def test_qp_early_stop_still_valid(rng):
    g = random_graph(25, 0.5, rng)
    m = SizeVector((8, 8, 9))
    p, dual, ops = _setup(g, m)
    short = qp_lower_bound(g, m, dual, p, max_iters=3, ops=ops)
    long = qp_lower_bound(g, m, dual, p, max_iters=3000, tol=1e-10, ops=ops)
    assert not short.info["converged"]
    assert short.value <= long.value + 1e-9
    assert short.value <= long.info["raw"] + 1e-9
