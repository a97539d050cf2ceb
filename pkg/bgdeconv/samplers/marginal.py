"""
BG Deconvolution Marginal Sampler
Gibbs sweep over q with x integrated out. The inverse of
C = sigma_eps^-2 G'G + I over the active columns G of H is carried as a
Cholesky factor F (F'F = C^-1) and updated in O(L^2) per flip.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from ..exceptions import DowndateBreakdownError, SamplerError
from ..linalg import (
    DOWNDATE_TOL, CholFactor, DriftMonitor, chol_grow, chol_remove_index, refactor_inverse,
)
from ..model import BgState, ConvOperator
from .conjugate import LAMBDA_CLAMP, clamp_lambda

logger = logging.getLogger(__name__)


class SignLawError(SamplerError):
    """delta * tau lost its sign, the maintained factor no longer matches C^-1"""


class MarginalState:
    """
    Active set and factor F of C^-1 for one chain.

    The active columns G are never stored: G'h_i is read off the IR
    autocorrelation since (H'H)[a, i] depends on |a - i| only.

    Args:
        op: convolution operator for the current h
        z: observations
        sigma_eps2: noise variance the factor was built for
        active: active site indices, in factor order
        monitor: drift monitor scheduling from-scratch refreshes
    """

    def __init__(self, op: ConvOperator, z: np.ndarray, sigma_eps2: float, active: List[int],
                 monitor: Optional[DriftMonitor] = None, downdate_tol: float = DOWNDATE_TOL):
        self.op = op
        self.z = z
        self.sigma_eps2 = sigma_eps2
        self.active = list(active)
        self.monitor = monitor or DriftMonitor()
        self.downdate_tol = downdate_tol
        self.breakdowns = 0
        self.rebuilds = 0

        autocorr = op.autocorrelation()
        self._gram_row = np.zeros(op.dims.M)
        self._gram_row[:min(autocorr.size, op.dims.M)] = autocorr[:op.dims.M]
        self._hz = op.rmatvec(z)
        self.rebuild()
        self.rebuilds = 0

    @classmethod
    def build(cls, q: np.ndarray, z: np.ndarray, op: ConvOperator, sigma_eps2: float,
              monitor: Optional[DriftMonitor] = None,
              downdate_tol: float = DOWNDATE_TOL) -> 'MarginalState':
        """Factor C^-1 from scratch for the support of q"""
        return cls(op, z, sigma_eps2, list(np.flatnonzero(q)), monitor, downdate_tol)

    @property
    def L(self) -> int:
        return len(self.active)

    def target(self) -> np.ndarray:
        """C^-1 computed densely"""
        idx = np.asarray(self.active, dtype=int)
        C = np.eye(idx.size) + self._gram(idx[:, None] - idx[None, :]) / self.sigma_eps2
        return np.linalg.inv(C)

    def consistency_gap(self) -> float:
        """||F'F - C^-1||_F against a fresh dense inverse"""
        return float(np.linalg.norm(self.F.gram() - self.target()))

    def _gram(self, offsets: np.ndarray) -> np.ndarray:
        return self._gram_row[np.abs(offsets)]

    def rebuild(self) -> None:
        """Refactor C^-1 from scratch"""
        idx = np.asarray(self.active, dtype=int)
        C = np.eye(idx.size) + self._gram(idx[:, None] - idx[None, :]) / self.sigma_eps2
        self.F = refactor_inverse(C)
        self._sync()
        self.rebuilds += 1

    def _sync(self) -> None:
        self._idx = np.asarray(self.active, dtype=int)
        self._gz = self._hz[self._idx]
        self._fgz = self.F.F @ self._gz
        # posterior mean of the active amplitudes and the residual it leaves
        self._mean = self.F.F.T @ self._fgz / self.sigma_eps2
        self._resid_z = self.z - self._active_matvec(self._mean)

    def _active_matvec(self, w: np.ndarray) -> np.ndarray:
        u = np.zeros(self.op.dims.M)
        u[self._idx] = w
        return self.op.matvec(u)

    def delta_f(self, i: int, active_now: bool, lam: float) -> Tuple[float, float, np.ndarray]:
        """
        f(q with site i flipped) - f(q).

        The sign law is checked on tau formed from F. The returned difference
        is evaluated without that subtraction: a removal reads C^-1[r, r] and
        the posterior mean off F, an addition uses the ridge residual of h_i
        against the active columns, whose norm enters only to second order in
        the error of F.

        Returns:
            Tuple of (delta f, tau, F G'h_i); tau and F G'h_i are reused by `add`

        Raises:
            SignLawError: delta * tau <= 0
        """
        se2 = self.sigma_eps2
        delta = -1.0 if active_now else 1.0
        fgh = self.F.F @ self._gram(self._idx - i)
        tau = delta + self.op.norm2 / se2 - float(fgh @ fgh) / se2 ** 2
        if delta * tau <= 0.0:
            raise SignLawError(f"delta*tau = {delta * tau:.3e} at site {i}")
        prior = 2.0 * math.log(1.0 / lam - 1.0)

        if active_now:
            r = self.active.index(i)
            c_rr = float(self.F.F[:, r] @ self.F.F[:, r])
            mean = float(self._mean[r])
            return math.log(c_rr) + mean * mean / c_rr - prior, -c_rr, fgh

        # w = (se2 I + G'G)^-1 G'h_i
        w = self.F.F.T @ fgh / se2
        resid_h = self.op.column(i) - self._active_matvec(w)
        kappa = float(resid_h @ resid_h) + se2 * float(w @ w)
        phi = float(resid_h @ self._resid_z) + se2 * float(w @ self._mean)
        df = math.log1p(kappa / se2) - phi * phi / (se2 * (se2 + kappa)) + prior
        return df, 1.0 + kappa / se2, fgh

    def add(self, i: int, tau: float, fgh: np.ndarray) -> None:
        """Grow the factor by site i using the quantities of `delta_f`"""
        root = math.sqrt(tau)
        b = -(self.F.F.T @ fgh) / (self.sigma_eps2 * tau)
        self.F = chol_grow(self.F, np.append(b * root, 1.0 / root))
        self.active.append(i)
        self._sync()
        self._after_operation()

    def remove(self, i: int) -> None:
        """Drop site i, refactoring from scratch when the downdate breaks down"""
        r = self.active.index(i)
        b = self.F.F.T @ self.F.F[:, r]
        tau = 1.0 / b[r]
        try:
            self.F = chol_remove_index(self.F, r, b, tau, self.downdate_tol)
            del self.active[r]
            self._sync()
        except DowndateBreakdownError as err:
            self.breakdowns += 1
            logger.warning(f"{err}; refactoring C^-1 without site {i}")
            del self.active[r]
            self.rebuild()
        self._after_operation()

    def _after_operation(self) -> None:
        if self.monitor.tick():
            maintained = self.F
            self.rebuild()
            self.F = self.monitor.refresh(maintained, self.F)

    def sample_x(self, rng: np.random.Generator) -> np.ndarray:
        """x_active ~ N(C^-1 G'z / sigma_eps2, C^-1), scattered into a length-M vector"""
        x = np.zeros(self.op.dims.M)
        if self.L:
            noise = rng.standard_normal(self.L)
            x[self._idx] = self.F.F.T @ (self._fgz / self.sigma_eps2 + noise)
        return x


def _checked_delta(ms: MarginalState, i: int, active_now: bool,
                   lam: float) -> Tuple[float, float, np.ndarray]:
    try:
        return ms.delta_f(i, active_now, lam)
    except SignLawError as err:
        logger.warning(f"{err}; refactoring C^-1")
        ms.rebuild()
        return ms.delta_f(i, active_now, lam)


def step1_marginal(state: BgState, z: np.ndarray, op: ConvOperator, rng: np.random.Generator,
                   ms: Optional[MarginalState] = None, monitor: Optional[DriftMonitor] = None,
                   lam_clamp: float = LAMBDA_CLAMP,
                   downdate_tol: float = DOWNDATE_TOL) -> Tuple[BgState, MarginalState]:
    """
    Sweep i = 0..M-1 flipping q_i with probability 1 / (1 + exp(delta f / 2)),
    then draw the active amplitudes jointly.

    Args:
        ms: factor state to continue from; rebuilt from q when omitted

    Returns:
        Tuple of (new state, marginal state after the sweep)

    Raises:
        SamplerError: the sign law still fails after a fresh refactorization
    """
    new = state.copy()
    lam = clamp_lambda(new.lam, lam_clamp)
    if ms is None:
        ms = MarginalState.build(new.q, z, op, new.sigma_eps2, monitor, downdate_tol)

    for i in range(op.dims.M):
        active_now = bool(new.q[i])
        df, tau, fgh = _checked_delta(ms, i, active_now, lam)
        if rng.random() > expit(0.5 * df):
            if active_now:
                ms.remove(i)
            else:
                ms.add(i, tau, fgh)
            new.q[i] = not active_now

    new.x = ms.sample_x(rng)
    return new, ms
