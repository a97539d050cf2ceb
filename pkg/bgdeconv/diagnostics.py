"""
BG Deconvolution Diagnostics
Multivariate potential scale reduction factor over parallel chains, its
batched trace, the two-step posterior estimate and the first-visit metric.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .exceptions import ConfigError, DiagnosticUndefinedError, DimensionError
from .model import ConvOperator, Hyperpriors, ModelDims
from .samplers.chain import ChainJob, ChainTrace, run_chain
from .samplers.kernel import SamplerKind, SamplerSettings

logger = logging.getLogger(__name__)

RIDGE = 1e-10


@dataclass
class ChainEnsemble:
    """
    m chains of n retained sample vectors, samples[j, t] = Phi_jt.

    Args:
        samples: array of shape (m, n, d)
        seeds: seed of each chain
    """
    samples: np.ndarray
    seeds: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 3:
            raise DimensionError(f"Ensemble samples must be (m, n, d), got {self.samples.shape}")

    @classmethod
    def from_traces(cls, traces: Sequence[ChainTrace]) -> 'ChainEnsemble':
        """Stack the q traces of successful chains, cut to the shortest one"""
        usable = [t for t in traces if not t.failed]
        if not usable:
            raise DiagnosticUndefinedError("No successful chain to build an ensemble from")
        n = min(t.iterations for t in usable)
        return cls(np.stack([t.q[:n].astype(float) for t in usable]), [t.seed for t in usable])

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def window(self, start: int, stop: int) -> 'ChainEnsemble':
        return ChainEnsemble(self.samples[:, start:stop], self.seeds)


@dataclass
class MpsrfTrace:
    """MPSRF after each batch of b iterations, as (iteration kb, value) points"""
    batch_size: int
    points: List[Tuple[int, float]] = field(default_factory=list)

    def first_below(self, threshold: float) -> Optional[int]:
        """Iteration of the first point under the threshold"""
        for iteration, value in self.points:
            if value < threshold:
                return iteration
        return None


def mpsrf(ensemble: ChainEnsemble) -> float:
    """
    (n - 1) / n + (m + 1) / m * lambda_max(V_intra^-1 V_inter).

    Coordinates constant across every chain and sample are dropped and
    V_intra is ridged by 1e-10 trace / dim before the generalized eigenproblem.

    Raises:
        DimensionError: fewer than two chains or two samples
        DiagnosticUndefinedError: every coordinate is constant, or the chains are
            frozen in different states so that V_intra vanishes
    """
    m, n = ensemble.m, ensemble.n
    if m < 2 or n < 2:
        raise DimensionError(f"MPSRF needs m >= 2 and n >= 2, got m={m}, n={n}")

    phi = ensemble.samples
    flat = phi.reshape(-1, phi.shape[2])
    keep = np.ptp(flat, axis=0) > 0
    if not np.any(keep):
        raise DiagnosticUndefinedError("All coordinates are constant across chains")
    phi = phi[:, :, keep]
    dim = phi.shape[2]

    chain_means = phi.mean(axis=1)
    centered = phi - chain_means[:, None, :]
    v_intra = np.einsum('jti,jtk->ik', centered, centered) / (m * (n - 1))
    spread = chain_means - chain_means.mean(axis=0)
    v_inter = spread.T @ spread / (m - 1)

    if not np.any(v_inter):
        return (n - 1) / n
    spread_intra = np.trace(v_intra)
    if spread_intra <= 0.0:
        raise DiagnosticUndefinedError("Chains are each constant but differ from one another")
    v_intra = v_intra + RIDGE * spread_intra / dim * np.eye(dim)
    try:
        lam_max = max(float(linalg.eigh(v_inter, v_intra, eigvals_only=True)[-1]), 0.0)
    except np.linalg.LinAlgError as err:
        raise DiagnosticUndefinedError(f"Within-chain covariance is singular: {err}") from err
    return (n - 1) / n + (m + 1) / m * lam_max


def mpsrf_trace(ensemble: ChainEnsemble, b: int, on_undefined: str = 'raise') -> MpsrfTrace:
    """
    MPSRF on the second half of the first kb samples, k = 1, 2, ...

    Points with fewer than two retained samples are skipped.

    Args:
        ensemble: chains
        b: batch size
        on_undefined: 'raise' to propagate DiagnosticUndefinedError, 'skip'
            to leave such points out
    """
    if b < 1:
        raise ConfigError(f"Batch size must be at least 1, got {b}")
    trace = MpsrfTrace(batch_size=b)
    for stop in range(b, ensemble.n + 1, b):
        start = stop // 2
        if stop - start < 2:
            continue
        try:
            value = mpsrf(ensemble.window(start, stop))
        except DiagnosticUndefinedError:
            if on_undefined != 'skip':
                raise
            logger.debug(f"MPSRF undefined at iteration {stop}, point skipped")
            continue
        trace.points.append((stop, value))
    return trace


@dataclass
class BgEstimate:
    """Two-step posterior estimate of the parameters"""
    q: np.ndarray
    x: np.ndarray
    h: np.ndarray
    lam: float
    sigma_eps2: float
    sigma_h2: float
    spike_probability: np.ndarray
    x_mean: Optional[np.ndarray] = None
    samples: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'q': self.q.astype(int).tolist(),
            'x': self.x.tolist(),
            'h': self.h.tolist(),
            'lambda': self.lam,
            'sigma_eps2': self.sigma_eps2,
            'sigma_h2': self.sigma_h2,
            'spike_probability': self.spike_probability.tolist(),
            'x_posterior_mean': None if self.x_mean is None else self.x_mean.tolist(),
            'samples': self.samples,
        }


def conditional_amplitudes(q: np.ndarray, z: np.ndarray, op: ConvOperator,
                           sigma_eps2: float) -> np.ndarray:
    """Mean of x given (q, h, sigma_eps2, z): C^-1 G'z / sigma_eps2 on the support of q"""
    x = np.zeros(op.dims.M)
    active = np.flatnonzero(q)
    if active.size == 0:
        return x
    C = np.eye(active.size) + op.gram_entries(active[:, None] - active[None, :]) / sigma_eps2
    x[active] = linalg.cho_solve(linalg.cho_factor(C), op.rmatvec(z)[active] / sigma_eps2)
    return x


def estimate(traces: Union[ChainTrace, Sequence[ChainTrace]], burn_in: int, z: np.ndarray,
             dims: ModelDims) -> BgEstimate:
    """
    Pool the samples after the burn-in J of every chain, take the per-site
    majority for q (exactly one half goes to 0), sample means for the
    continuous parameters and the conditional Gaussian mean for x.

    Raises:
        ConfigError: J is not below the recorded length of some chain
    """
    if isinstance(traces, ChainTrace):
        traces = [traces]
    usable = [t for t in traces if not t.failed]
    if not usable:
        raise ConfigError("No successful chain to estimate from")
    for trace in usable:
        if not 0 <= burn_in < trace.iterations:
            raise ConfigError(f"Burn-in {burn_in} must be below the {trace.iterations} "
                              f"recorded iterations of chain seed={trace.seed}")

    q_hits = sum(np.count_nonzero(t.q[burn_in:], axis=0) for t in usable)
    total = sum(t.iterations - burn_in for t in usable)
    probability = q_hits / total
    q_hat = 2 * q_hits > total

    h_hat = np.concatenate([t.h[burn_in:] for t in usable]).mean(axis=0)
    lam_hat = float(np.concatenate([t.lam[burn_in:] for t in usable]).mean())
    se2_hat = float(np.concatenate([t.sigma_eps2[burn_in:] for t in usable]).mean())
    sh2_hat = float(np.concatenate([t.sigma_h2[burn_in:] for t in usable]).mean())

    x_hat = conditional_amplitudes(q_hat, z, ConvOperator(dims, h_hat), se2_hat)

    x_mean = None
    counted = [t for t in usable if t.x_count > 0]
    if counted:
        x_mean = sum(t.x_sum for t in counted) / sum(t.x_count for t in counted)

    return BgEstimate(q=q_hat, x=x_hat, h=h_hat, lam=lam_hat, sigma_eps2=se2_hat,
                      sigma_h2=sh2_hat, spike_probability=probability, x_mean=x_mean,
                      samples=int(total))


def first_visit(kind: SamplerKind, z: np.ndarray, dims: ModelDims, q_true: np.ndarray,
                max_iter: int, seed: int, init: Optional[Dict[str, Any]] = None,
                priors: Hyperpriors = Hyperpriors(),
                settings: SamplerSettings = SamplerSettings()) -> Optional[int]:
    """
    Iteration at which a chain first holds q = q_true, or None within max_iter.

    Returns 0 when the initial state already matches.
    """
    job = ChainJob(z=z, dims=dims, kind=kind, seed=seed, iterations=max_iter,
                   burn_in=max_iter, priors=priors, settings=settings, init=init,
                   stop_at=np.asarray(q_true, dtype=bool))
    trace = run_chain(job)
    if trace.failed:
        logger.warning(f"First-visit chain seed={seed} failed: {trace.error}")
    return trace.first_visit
