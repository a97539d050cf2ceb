"""
Unit tests for Cholesky factorization and rank-1 maintenance
"""
import numpy as np
import pytest

from bgdeconv.exceptions import DowndateBreakdownError, FactorizationError, SingularityError
from bgdeconv.linalg import (
    CholFactor, DriftMonitor, chol_grow, chol_rank1_downdate, chol_rank1_update,
    chol_remove_index, cholesky, frobenius_gap, refactor_inverse, solve_lower_transpose,
    solve_upper,
)


def _spd(L, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((L, L))
    return B.T @ B + L * np.eye(L), rng


def test_cholesky_identity_and_known_factor():
    """Test factoring I and a product built from a known upper factor"""
    assert np.array_equal(cholesky(np.eye(4)).F, np.eye(4))

    rng = np.random.default_rng(1)
    U = np.triu(rng.standard_normal((5, 5)))
    U[np.diag_indices(5)] = np.abs(U[np.diag_indices(5)]) + 0.5
    np.testing.assert_allclose(cholesky(U.T @ U).F, U, atol=1e-10)
    assert cholesky(np.zeros((0, 0))).L == 0
    print("✓ Cholesky factorization test passed")


def test_cholesky_reports_failing_pivot():
    """Test that a non-positive pivot is reported by index"""
    with pytest.raises(FactorizationError) as excinfo:
        cholesky(np.diag([1.0, -1.0, 1.0]))
    assert excinfo.value.pivot == 1

    with pytest.raises(FactorizationError):
        cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))


def test_triangular_solves():
    """Test forward and back substitution against dense solves"""
    A, rng = _spd(6, seed=2)
    F = cholesky(A)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(solve_upper(F, b), np.linalg.solve(F.F, b), atol=1e-12)
    np.testing.assert_allclose(solve_lower_transpose(F, b), np.linalg.solve(F.F.T, b),
                               atol=1e-12)
    with pytest.raises(SingularityError):
        solve_upper(CholFactor(np.diag([1.0, 0.0])), np.ones(2))


def test_rank1_update_and_downdate():
    """Test update and downdate against the dense products"""
    A, rng = _spd(7, seed=3)
    F = cholesky(A)
    d = rng.standard_normal(7)

    up = chol_rank1_update(F, d)
    np.testing.assert_allclose(up.gram(), A + np.outer(d, d), rtol=1e-12, atol=1e-10)
    assert np.array_equal(chol_rank1_update(F, np.zeros(7)).F, F.F)

    back = chol_rank1_downdate(up, d)
    np.testing.assert_allclose(back.F, F.F, atol=1e-10)
    assert np.all(np.diag(back.F) > 0)

    small = 0.3 * rng.standard_normal(7)
    down = chol_rank1_downdate(F, small)
    np.testing.assert_allclose(down.gram(), A - np.outer(small, small), atol=1e-10)
    print("✓ Rank-1 update/downdate test passed")


def test_downdate_breakdown():
    """Test that a downdate to a singular matrix raises with rho^2 <= tol"""
    with pytest.raises(DowndateBreakdownError):
        chol_rank1_downdate(CholFactor(np.eye(2)), np.array([1.0, 0.0]))

    # removing index i by a plain full-size downdate zeroes row i of the product
    A, _ = _spd(5, seed=4)
    i = 2
    b = A[:, i]
    with pytest.raises(DowndateBreakdownError) as excinfo:
        chol_rank1_downdate(cholesky(A), b / np.sqrt(b[i]))
    assert excinfo.value.rho2 <= 1e-12


def test_grow():
    """Test growing a factor by one dimension"""
    A, rng = _spd(4, seed=5)
    w = rng.standard_normal(5)
    w[-1] = abs(w[-1]) + 0.1
    padded = np.zeros((5, 5))
    padded[:4, :4] = A
    np.testing.assert_allclose(chol_grow(cholesky(A), w).gram(), padded + np.outer(w, w),
                               atol=1e-10)
    np.testing.assert_allclose(chol_grow(CholFactor.empty(), np.array([2.0])).F, [[2.0]])


@pytest.mark.parametrize("i", [0, 2, 5])
def test_remove_index(i):
    """Test index removal at the first, an interior and the last position"""
    A, _ = _spd(6, seed=6)
    b = A[:, i]
    tau = 1.0 / b[i]
    removed = chol_remove_index(cholesky(A), i, b, tau)
    keep = np.delete(np.arange(6), i)
    expected = A[np.ix_(keep, keep)] - tau * np.outer(b[keep], b[keep])
    np.testing.assert_allclose(removed.gram(), expected, rtol=1e-12, atol=1e-10)
    assert removed.L == 5


def test_remove_only_index():
    """Test that removing the single index of a 1x1 factor gives the empty factor"""
    removed = chol_remove_index(CholFactor(np.array([[3.0]])), 0, np.array([9.0]), 1.0 / 9.0)
    assert removed.L == 0


def test_random_operation_sequence():
    """Test a long random mix of grow, update and remove against the dense product"""
    rng = np.random.default_rng(7)
    A = np.array([[2.0]])
    F = cholesky(A)
    for step in range(2000):
        L = F.L
        choice = rng.integers(3)
        if (choice == 0 and L < 8) or L == 1:
            w = rng.standard_normal(L + 1)
            w[-1] = abs(w[-1]) + 0.5
            F = chol_grow(F, w)
            padded = np.zeros((L + 1, L + 1))
            padded[:L, :L] = A
            A = padded + np.outer(w, w)
        elif choice == 1:
            d = 0.5 * rng.standard_normal(L)
            F = chol_rank1_update(F, d)
            A = A + np.outer(d, d)
        else:
            i = int(rng.integers(L))
            b = A[:, i]
            tau = 1.0 / b[i]
            keep = np.delete(np.arange(L), i)
            F = chol_remove_index(F, i, b, tau)
            A = A[np.ix_(keep, keep)] - tau * np.outer(b[keep], b[keep])
        gap = frobenius_gap(F, A)
        assert gap <= 1e-8 * max(np.linalg.norm(A), 1.0), f"Drift {gap} at step {step}"
    print("✓ Random operation sequence test passed")


def test_refactor_inverse():
    """Test the from-scratch factor of an inverse"""
    A, _ = _spd(5, seed=8)
    np.testing.assert_allclose(refactor_inverse(A).gram(), np.linalg.inv(A), atol=1e-12)
    assert refactor_inverse(np.zeros((0, 0))).L == 0
    assert frobenius_gap(CholFactor.empty(), None) == 0.0


def test_drift_monitor():
    """Test refresh scheduling and violation counting"""
    monitor = DriftMonitor(interval=3, tol=1e-6)
    due = [monitor.tick() for _ in range(7)]
    assert due == [False, False, True, False, False, True, False]

    fresh = CholFactor(np.eye(2))
    assert monitor.refresh(CholFactor(np.eye(2)), fresh) is fresh
    monitor.refresh(CholFactor(2 * np.eye(2)), fresh)
    assert (monitor.refreshes, monitor.violations) == (2, 1)

    never = DriftMonitor(interval=0)
    assert not any(never.tick() for _ in range(5))


def run_all_tests():
    """Run all tests"""
    test_cholesky_identity_and_known_factor()
    test_cholesky_reports_failing_pivot()
    test_triangular_solves()
    test_rank1_update_and_downdate()
    test_downdate_breakdown()
    test_grow()
    for i in (0, 2, 5):
        test_remove_index(i)
    test_remove_only_index()
    test_random_operation_sequence()
    test_refactor_inverse()
    test_drift_monitor()
    print("\n✅ All linear algebra tests passed!")


if __name__ == '__main__':
    run_all_tests()
