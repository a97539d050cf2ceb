"""
BG Deconvolution Linear Algebra
Dense Cholesky factorization and O(L^2) rank-1 maintenance of an upper
triangular factor F (F'F = A), including removal of an arbitrary index.
"""
import logging
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .exceptions import (
    DimensionError, DowndateBreakdownError, FactorizationError, SingularityError,
)

logger = logging.getLogger(__name__)

DOWNDATE_TOL = 1e-12


class CholFactor:
    """
    Upper-triangular Cholesky factor F of a symmetric positive-definite matrix.

    A factor is owned by exactly one chain; the operations below return new
    factors and never modify their argument.
    """

    def __init__(self, F: np.ndarray):
        F = np.asarray(F, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise DimensionError(f"Cholesky factor must be square, got {F.shape}")
        self.F = F

    @classmethod
    def empty(cls) -> 'CholFactor':
        return cls(np.zeros((0, 0)))

    @property
    def L(self) -> int:
        return self.F.shape[0]

    def gram(self) -> np.ndarray:
        """The represented matrix F'F"""
        return self.F.T @ self.F

    def logdet(self) -> float:
        """log |F'F|"""
        return float(2.0 * np.sum(np.log(np.diag(self.F))))

    def copy(self) -> 'CholFactor':
        return CholFactor(self.F.copy())

    def __repr__(self) -> str:
        return f"CholFactor(L={self.L})"


def cholesky(A: np.ndarray) -> CholFactor:
    """
    Factor a symmetric positive-definite matrix as F'F.

    Raises:
        FactorizationError: a non-positive pivot was met; `pivot` is its 0-based index
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"Matrix must be square, got {A.shape}")
    if A.shape[0] == 0:
        return CholFactor.empty()
    scale = max(np.abs(A).max(), 1.0)
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10 * scale):
        raise FactorizationError(-1, "Matrix is not symmetric")
    F, info = lapack.dpotrf(A, lower=0, clean=1)
    if info > 0:
        raise FactorizationError(info - 1)
    if info < 0:
        raise DimensionError(f"dpotrf rejected argument {-info}")
    return CholFactor(F)


def _check_diagonal(F: CholFactor) -> None:
    if np.any(np.diag(F.F) == 0.0):
        raise SingularityError("Triangular factor has a zero diagonal entry")


def solve_upper(F: CholFactor, b: np.ndarray) -> np.ndarray:
    """Solve F x = b by back substitution"""
    _check_diagonal(F)
    if F.L == 0:
        return np.zeros(0)
    return linalg.solve_triangular(F.F, b, lower=False)


def solve_lower_transpose(F: CholFactor, b: np.ndarray) -> np.ndarray:
    """Solve F' x = b by forward substitution"""
    _check_diagonal(F)
    if F.L == 0:
        return np.zeros(0)
    return linalg.solve_triangular(F.F, b, trans='T', lower=False)


def _rotate_in(F: np.ndarray, w: np.ndarray) -> None:
    """In place: F <- factor of F'F + ww' by a sweep of Givens rotations"""
    for k in range(F.shape[0]):
        b = w[k]
        if b == 0.0:
            continue
        a = F[k, k]
        r = np.hypot(a, b)
        c, s = a / r, b / r
        row = F[k, k:].copy()
        F[k, k:] = c * row + s * w[k:]
        w[k:] = c * w[k:] - s * row


def chol_rank1_update(F: CholFactor, d: np.ndarray) -> CholFactor:
    """
    Factor of F'F + dd' in O(L^2).

    A zero diagonal entry is allowed, which is how a factor padded with an
    empty last row/column is grown by one dimension.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (F.L,):
        raise DimensionError(f"Update vector must have length {F.L}, got {d.shape}")
    G = F.F.copy()
    _rotate_in(G, d.copy())
    return CholFactor(G)


def chol_grow(F: CholFactor, w: np.ndarray) -> CholFactor:
    """Factor of [F 0; 0 0]'[F 0; 0 0] + ww', one dimension larger"""
    padded = np.zeros((F.L + 1, F.L + 1))
    padded[:F.L, :F.L] = F.F
    return chol_rank1_update(CholFactor(padded), w)


def chol_rank1_downdate(F: CholFactor, d: np.ndarray, tol: float = DOWNDATE_TOL) -> CholFactor:
    """
    Factor of F'F - dd' in O(L^2).

    Solves F'p = d and requires rho^2 = 1 - p'p > tol, then sweeps the
    rotations that carry p onto the extra coordinate (LINPACK dchdd).

    Raises:
        DowndateBreakdownError: rho^2 <= tol, the difference is not positive definite
    """
    d = np.asarray(d, dtype=float)
    L = F.L
    if d.shape != (L,):
        raise DimensionError(f"Downdate vector must have length {L}, got {d.shape}")
    if L == 0:
        return CholFactor.empty()

    p = solve_lower_transpose(F, d)
    rho2 = 1.0 - float(p @ p)
    if rho2 <= tol:
        raise DowndateBreakdownError(rho2)

    alpha = np.sqrt(rho2)
    cos = np.empty(L)
    sin = np.empty(L)
    for i in range(L - 1, -1, -1):
        scale = alpha + abs(p[i])
        a, b = alpha / scale, p[i] / scale
        norm = np.hypot(a, b)
        cos[i], sin[i] = a / norm, b / norm
        alpha = scale * norm

    G = F.F.copy()
    carry = np.zeros(L)
    for i in range(L - 1, -1, -1):
        row = G[i, i:].copy()
        G[i, i:] = cos[i] * row - sin[i] * carry[i:]
        carry[i:] = cos[i] * carry[i:] + sin[i] * row

    negative = np.diag(G) < 0
    G[negative, :] *= -1.0
    return CholFactor(G)


def chol_remove_index(F: CholFactor, i: int, b: np.ndarray, tau: float,
                      tol: float = DOWNDATE_TOL) -> CholFactor:
    """
    Remove index i from the matrix F'F - b tau b'.

    Given b = F'F[:, i] and 1/tau = b[i], returns the (L-1) x (L-1) factor of
    (F'F)_{-i,-i} - tau b_{-i} b_{-i}'. The dimension is lowered first: rows
    below i are refolded with an update by e = F[i, i+1:], then the i-th row
    and column are dropped, then a single downdate by sqrt(tau) b_{-i}.
    Removing the last index needs the downdate only.

    Raises:
        DowndateBreakdownError: propagated from the downdate
    """
    L = F.L
    if not 0 <= i < L:
        raise DimensionError(f"Index {i} out of range for a factor of size {L}")
    if L == 1:
        return CholFactor.empty()

    work = F.F.copy()
    if i < L - 1:
        e = work[i, i + 1:].copy()
        _rotate_in(work[i + 1:, i + 1:], e)
    reduced = np.delete(np.delete(work, i, axis=0), i, axis=1)
    v = np.delete(np.asarray(b, dtype=float), i)
    return chol_rank1_downdate(CholFactor(reduced), np.sqrt(tau) * v, tol)


class DriftMonitor:
    """
    Counts incremental factor operations and signals when a from-scratch
    refactorization is due.

    Args:
        interval: number of incremental operations between refreshes
        tol: Frobenius tolerance between the maintained and fresh products
    """

    def __init__(self, interval: int = 1000, tol: float = 1e-6):
        self.interval = interval
        self.tol = tol
        self.operations = 0
        self.refreshes = 0
        self.violations = 0

    def tick(self) -> bool:
        """Record one incremental operation; True when a refresh is due"""
        self.operations += 1
        return self.interval > 0 and self.operations % self.interval == 0

    def refresh(self, maintained: CholFactor, fresh: CholFactor) -> CholFactor:
        """Compare both products, log the drift and hand back the fresh factor"""
        self.refreshes += 1
        drift = float(np.linalg.norm(maintained.gram() - fresh.gram()))
        if drift > self.tol:
            self.violations += 1
            logger.warning(f"Cholesky drift {drift:.3e} exceeds {self.tol:.1e} "
                           f"after {self.operations} operations")
        else:
            logger.debug(f"Cholesky drift {drift:.3e} after {self.operations} operations")
        return fresh


def refactor_inverse(A: np.ndarray) -> CholFactor:
    """Factor of A^-1 for a symmetric positive-definite A, from scratch"""
    if A.shape[0] == 0:
        return CholFactor.empty()
    inv = linalg.cho_solve(linalg.cho_factor(A, lower=False), np.eye(A.shape[0]))
    return cholesky(0.5 * (inv + inv.T))


def frobenius_gap(F: CholFactor, target: Optional[np.ndarray]) -> float:
    """||F'F - target||_F"""
    if target is None:
        return 0.0
    return float(np.linalg.norm(F.gram() - target))
