from __future__ import annotations

import numpy as np
import pytest

from cutbounds.graph import SizeVector, check_partition
from cutbounds.lp import LpError, dual_lp_solve, snap_integral, transport_solve

from conftest import all_labelings, brute_msp, labels_to_matrix


def _brute_transport(P, m):
    best = -np.inf
    for lab in all_labelings(m):
        best = max(best, float(P[np.arange(m.n), lab].sum()))
    return best


def test_transport_example():
    P = np.array([[0.6, 0.4], [0.4, 0.6], [0.2, 0.8]])
    sol = transport_solve(P, (1, 2))
    assert sol.X.tolist() == [[1, 0], [0, 1], [0, 1]]
    assert sol.value == pytest.approx(2.0)


def test_transport_own_partition_is_optimal(rng):
    m = SizeVector((3, 4, 2))
    for _ in range(10):
        X = labels_to_matrix(rng.permutation(np.repeat(np.arange(3), m.m)), 3)
        assert np.array_equal(transport_solve(X, m).X, X)


def test_transport_zero_profit():
    m = SizeVector((2, 2, 3))
    sol = transport_solve(np.zeros((7, 3)), m)
    check_partition(sol.X, m)
    assert sol.value == 0


def test_transport_inconsistent_demands():
    with pytest.raises(LpError):
        transport_solve(np.zeros((4, 2)), (1, 2))
    with pytest.raises(ValueError):
        transport_solve(np.zeros((4, 2)), (1, 2, 1))


def test_transport_brute_force(rng):
    """Exhaustive enumeration for n <= 8, k = 3, integer and real profits."""
    for trial in range(100):
        n = int(rng.integers(3, 9))
        cuts = np.sort(rng.choice(np.arange(1, n), 2, replace=False))
        m = SizeVector(tuple(int(x) for x in np.diff(np.r_[0, cuts, n])))
        P = rng.integers(-3, 4, size=(n, 3)).astype(float) if trial % 2 else rng.standard_normal((n, 3))
        sol = transport_solve(P, m)
        check_partition(sol.X, m)
        assert sol.value == pytest.approx(_brute_transport(P, m), abs=1e-12)
        # dual potentials certify optimality
        assert np.all(P - sol.u[:, None] - sol.v[None, :] <= 1e-9)
        assert sol.u.sum() + sol.v @ m.array == pytest.approx(sol.value, abs=1e-9)


def test_transport_warm_start(rng):
    m = SizeVector((20, 25, 15))
    P = rng.standard_normal((60, 3))
    cold = transport_solve(P, m)
    again = transport_solve(P + 1e-3 * rng.standard_normal((60, 3)), m, warm_start=cold.basis)
    assert again.pivots <= cold.pivots
    same = transport_solve(P, m, warm_start=cold.basis)
    assert same.pivots == 0 and np.array_equal(same.X, cold.X)


def test_transport_large_matches_assignment(rng):
    from scipy.optimize import linear_sum_assignment
    m = SizeVector((150, 200, 250))
    P = rng.standard_normal((600, 3))
    sol = transport_solve(P, m)
    # expand columns into slots and solve the equivalent assignment problem
    cols = np.repeat(np.arange(3), m.m)
    r, c = linear_sum_assignment(-P[:, cols])
    assert sol.value == pytest.approx(P[r, cols[c]].sum(), abs=1e-9)


def test_transport_integral_and_deterministic(rng):
    m = SizeVector((5, 5, 5))
    P = rng.integers(0, 2, size=(15, 3)).astype(float)   # heavy degeneracy
    a = transport_solve(P, m)
    b = transport_solve(P.copy(), m)
    assert np.array_equal(a.X, b.X)
    assert set(np.unique(a.X)) <= {0, 1}


def test_snap_integral():
    assert snap_integral(np.array([[1 - 1e-12, 1e-12]])).tolist() == [[1, 0]]
    with pytest.raises(LpError):
        snap_integral(np.array([[0.5, 0.5]]))


def test_dual_lp_examples():
    sol = dual_lp_solve([1.0], [1.0, -1.0])
    assert sol.value == pytest.approx(-0.5, abs=1e-12)
    assert np.all(sol.s <= 0)
    z = dual_lp_solve([0.0, 0.0], [3.0, -1.0, 2.0])
    assert z.value == 0 and not z.s.any() and not z.t.any()
    sol = dual_lp_solve([1.0, 0.0, -1.0], [2.0, -1.0, -1.0])
    assert sol.value == pytest.approx(0.5 * brute_msp([2, -1, -1], [1, 0, -1]), abs=1e-12)


def _check_dual_feasible(sol, lam, sigma):
    assert np.all(sol.s <= 1e-12)
    assert np.all(sol.t[:, None] + sol.s[None, :] <= np.outer(lam, sigma) + 1e-9)


def test_dual_lp_random_vs_msp(rng):
    for _ in range(100):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, 9))
        lam = np.sort(rng.standard_normal(K))[::-1]
        sigma = rng.standard_normal(N) * 3
        sol = dual_lp_solve(lam, sigma)
        _check_dual_feasible(sol, lam, sigma)
        padded = np.concatenate([lam, np.zeros(N - K)])
        # sorted pairing: ascending sigma against descending padded lambda
        ref = 0.5 * float(np.sort(sigma) @ np.sort(padded)[::-1])
        assert sol.value == pytest.approx(ref, abs=1e-8)
        assert 0.5 * (sol.s.sum() + sol.t.sum()) == pytest.approx(sol.value, abs=1e-12)


def test_dual_lp_degenerate_spectra(rng):
    """Repeated values in both vectors (typical for structured graphs)."""
    for _ in range(30):
        lam = rng.choice([-2.0, 0.0, 1.0], size=3)
        sigma = rng.choice([-1.0, 0.0, 4.0], size=12)
        sol = dual_lp_solve(lam, sigma)
        _check_dual_feasible(sol, lam, sigma)
        full = 0.5 * float(np.sort(sigma) @ np.sort(np.concatenate([lam, np.zeros(9)]))[::-1])
        assert sol.value == pytest.approx(full, abs=1e-8)


def test_dual_lp_bad_input():
    with pytest.raises(ValueError):
        dual_lp_solve([1.0, 2.0, 3.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        dual_lp_solve([np.nan], [1.0])
