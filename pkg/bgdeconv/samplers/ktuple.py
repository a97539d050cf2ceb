"""
BG Deconvolution K-tuple Sampler
Block Gibbs over sliding windows of K consecutive sites, drawing (q_K, x_K)
jointly from the 2^K pattern mixture.
"""
import logging
import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ..exceptions import ConfigError
from ..linalg import cholesky
from ..model import BgState, ConvOperator
from .conjugate import LAMBDA_CLAMP, clamp_lambda

logger = logging.getLogger(__name__)

MAX_K = 4


@dataclass
class KTupleTables:
    """
    Per-pattern factors for one (h, sigma_eps2, sigma_x2, K).

    Pattern omega is stored at index mask - 1 where bit a of mask means
    offset a of the window is active. The inverse transposed factors
    U_omega'^-1 are stacked row-wise into one matrix so that every c_omega of
    a window comes out of a single matrix-vector product.
    """
    K: int
    offsets: List[np.ndarray]
    inverses: List[np.ndarray]
    log_alpha: np.ndarray
    sizes: np.ndarray
    starts: np.ndarray
    stacked: np.ndarray
    sigma_eps2: float
    sigma_x2: float

    @classmethod
    def build(cls, op: ConvOperator, sigma_eps2: float, sigma_x2: float, K: int) -> 'KTupleTables':
        if not 1 <= K <= MAX_K:
            raise ConfigError(f"K must lie in 1..{MAX_K}, got {K}")
        offsets, inverses, log_alpha = [], [], []
        for mask in range(1, 2 ** K):
            active = np.array([a for a in range(K) if mask >> a & 1])
            S = op.gram_entries(active[:, None] - active[None, :]) / sigma_eps2 \
                + np.eye(active.size) / sigma_x2
            U = cholesky(S)
            offsets.append(active)
            inverses.append(linalg.solve_triangular(U.F, np.eye(active.size), lower=False))
            log_alpha.append(-0.5 * U.logdet())

        sizes = np.array([a.size for a in offsets])
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        stacked = np.zeros((int(sizes.sum()), K))
        for start, active, inv in zip(starts, offsets, inverses):
            stacked[start:start + active.size, active] = inv.T
        return cls(K=K, offsets=offsets, inverses=inverses,
                   log_alpha=np.array(log_alpha), sizes=sizes, starts=starts,
                   stacked=stacked, sigma_eps2=sigma_eps2, sigma_x2=sigma_x2)

    def whitened(self, v: np.ndarray) -> np.ndarray:
        """All c_omega = U_omega'^-1 H_omega' e / sigma_eps2, concatenated"""
        return self.stacked @ v / self.sigma_eps2

    def log_weights(self, v: np.ndarray, lam: float) -> np.ndarray:
        """
        Unnormalized log-probabilities of the 2^K patterns of one window.

        Args:
            v: H_window' e_K, the window columns correlated with the residual
               that excludes the window's current contribution
            lam: Bernoulli rate

        Returns:
            Array indexed by mask; entry 0 is the empty pattern with weight 0
        """
        return self.weigh(self.whitened(v), lam)

    def weigh(self, c: np.ndarray, lam: float) -> np.ndarray:
        """Log-weights from already whitened vectors c"""
        sq = np.add.reduceat(c * c, self.starts)
        log_p = (-0.5 * self.sizes * math.log(self.sigma_x2) + self.log_alpha + 0.5 * sq
                 - self.sizes * math.log(1.0 / lam - 1.0))
        return np.concatenate([[0.0], log_p])


def ktuple_log_weights(state: BgState, z: np.ndarray, op: ConvOperator, i: int,
                       tables: KTupleTables) -> np.ndarray:
    """Pattern log-weights of the window starting at site i for the given state"""
    K = tables.K
    residual = z - op.matvec(state.x)
    span = slice(i, i + K + op.dims.P)
    e_window = residual[span] + np.convolve(state.x[i:i + K], op.h)
    v = np.correlate(e_window, op.h, mode='valid')
    return tables.log_weights(v, clamp_lambda(state.lam))


def step1_ktuple(state: BgState, z: np.ndarray, op: ConvOperator, K: int,
                 rng: np.random.Generator, tables: KTupleTables = None,
                 lam_clamp: float = LAMBDA_CLAMP) -> BgState:
    """
    Slide a window of K sites from i = 0 to M - K, drawing the window's
    pattern omega from its normalized weights, then x_omega ~ N(m_omega, R_omega).

    Windows overlap so every interior site is visited K times per sweep.

    Raises:
        ConfigError: K outside 1..4 or larger than M
    """
    M, P = op.dims.M, op.dims.P
    if K > M:
        raise ConfigError(f"K={K} exceeds the spike-train length M={M}")
    new = state.copy()
    lam = clamp_lambda(new.lam, lam_clamp)
    if tables is None or tables.K != K:
        tables = KTupleTables.build(op, new.sigma_eps2, new.sigma_x2, K)
    h = op.h

    residual = z - op.matvec(new.x)
    for i in range(M - K + 1):
        span = slice(i, i + K + P)
        e_window = residual[span] + np.convolve(new.x[i:i + K], h)
        v = np.correlate(e_window, h, mode='valid')
        c = tables.whitened(v)
        log_p = tables.weigh(c, lam)
        cdf = np.cumsum(np.exp(log_p - logsumexp(log_p)))
        mask = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side='right')), cdf.size - 1)

        window = np.zeros(K)
        q_window = np.zeros(K, dtype=bool)
        if mask > 0:
            k = mask - 1
            start, size = tables.starts[k], tables.sizes[k]
            draw = tables.inverses[k] @ (c[start:start + size] + rng.standard_normal(size))
            window[tables.offsets[k]] = draw
            q_window[tables.offsets[k]] = True
        new.x[i:i + K] = window
        new.q[i:i + K] = q_window
        residual[span] = e_window - np.convolve(window, h)
    return new
