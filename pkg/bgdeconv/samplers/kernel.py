"""
BG Deconvolution Sampler Kernel
Sampler kinds, chain initialization and one full Gibbs iteration:
Step 1 on (q, x) per kind, the shift/scale move, the h draw, then the
conjugate variance and rate draws.
"""
import logging
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
from scipy import stats

from ..exceptions import ConfigError, DimensionError
from ..linalg import DOWNDATE_TOL, DriftMonitor
from ..model import BgState, ConvOperator, Hyperpriors, ModelDims
from .conjugate import (
    LAMBDA_CLAMP, sample_h, sample_lambda, sample_sigma_eps, sample_sigma_h,
)
from .gig import GIG_MAX_REJECTIONS
from .ktuple import MAX_K, step1_ktuple
from .marginal import step1_marginal
from .moves import MoveCounters, timeshift_scale_move
from .site import step1_site

logger = logging.getLogger(__name__)

DEFAULT_ETA = 0.25
INITIAL_LAMBDA = 0.5

_KIND_PATTERN = re.compile(r'^(hybrid|pm|ktuple:(\d+))$')


class SamplerVariant(str, Enum):
    HYBRID = 'hybrid'
    KTUPLE = 'ktuple'
    MARGINAL = 'pm'


@dataclass(frozen=True)
class SamplerKind:
    """
    Which Step 1 kernel a chain runs, plus the shift probability.

    Args:
        variant: hybrid (site-wise), ktuple (K-site windows) or pm (x marginalized)
        K: window length, 1 for the hybrid and marginal samplers
        eta: probability of each shift direction
    """
    variant: SamplerVariant
    K: int = 1
    eta: float = DEFAULT_ETA

    def __post_init__(self):
        object.__setattr__(self, 'variant', SamplerVariant(self.variant))
        if not 1 <= self.K <= MAX_K:
            raise ConfigError(f"K must lie in 1..{MAX_K}, got {self.K}")
        if self.variant != SamplerVariant.KTUPLE and self.K != 1:
            raise ConfigError(f"Sampler '{self.variant.value}' works site by site (K=1)")
        if not 0.0 < self.eta < 0.5:
            raise ConfigError(f"eta must lie in (0, 1/2), got {self.eta}")

    @classmethod
    def parse(cls, text: str, eta: float = DEFAULT_ETA) -> 'SamplerKind':
        """Parse 'hybrid', 'pm' or 'ktuple:K'"""
        match = _KIND_PATTERN.match(text.strip().lower())
        if not match:
            raise ConfigError(f"Unknown sampler '{text}', expected hybrid, ktuple:K or pm")
        if match.group(2):
            return cls(SamplerVariant.KTUPLE, int(match.group(2)), eta)
        return cls(SamplerVariant(match.group(1)), 1, eta)

    @property
    def label(self) -> str:
        if self.variant == SamplerVariant.KTUPLE:
            return f"ktuple:{self.K}"
        return self.variant.value


@dataclass(frozen=True)
class SamplerSettings:
    """Numerical knobs, normally filled from the BGDECONV Django setting"""
    lam_clamp: float = LAMBDA_CLAMP
    downdate_tol: float = DOWNDATE_TOL
    refresh_interval: int = 1000
    drift_tol: float = 1e-6
    gig_max_rejections: int = GIG_MAX_REJECTIONS

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'SamplerSettings':
        data = data or {}
        return cls(
            lam_clamp=float(data.get('LAMBDA_CLAMP', LAMBDA_CLAMP)),
            downdate_tol=float(data.get('DOWNDATE_TOL', DOWNDATE_TOL)),
            refresh_interval=int(data.get('CHOL_REFRESH_INTERVAL', 1000)),
            drift_tol=float(data.get('CHOL_DRIFT_TOL', 1e-6)),
            gig_max_rejections=int(data.get('GIG_MAX_REJECTIONS', GIG_MAX_REJECTIONS)),
        )


@dataclass
class ChainCounters(MoveCounters):
    """Numerical events of one chain, written next to its traces"""
    downdate_breakdowns: int = 0
    refactorizations: int = 0
    drift_refreshes: int = 0
    drift_violations: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass
class ChainContext:
    """Mutable per-chain companions of the state: settings, counters and drift monitor"""
    settings: SamplerSettings = field(default_factory=SamplerSettings)
    counters: ChainCounters = field(default_factory=ChainCounters)
    monitor: Optional[DriftMonitor] = None

    def __post_init__(self):
        if self.monitor is None:
            self.monitor = DriftMonitor(self.settings.refresh_interval, self.settings.drift_tol)

    def sync_monitor(self) -> None:
        self.counters.drift_refreshes = self.monitor.refreshes
        self.counters.drift_violations = self.monitor.violations


def initial_state(dims: ModelDims, rng: np.random.Generator,
                  overrides: Optional[Dict[str, Any]] = None) -> BgState:
    """
    Starting point of a chain: unit spike IR centred at round(P/2), no spikes,
    variances drawn from IG(1, 1) and lambda = 1/2.

    Args:
        overrides: optional 'h', 'q', 'x', 'lambda', 'sigma_eps2', 'sigma_h2'
            values replacing the defaults

    Raises:
        DimensionError, InvariantError, DomainError: the overridden state is invalid
    """
    overrides = overrides or {}
    h = np.zeros(dims.P + 1)
    h[int(round(dims.P / 2))] = 1.0
    sigma_eps2 = float(stats.invgamma.rvs(1.0, scale=1.0, random_state=rng))
    sigma_h2 = float(stats.invgamma.rvs(1.0, scale=1.0, random_state=rng))

    state = BgState(
        q=np.zeros(dims.M, dtype=bool),
        x=np.zeros(dims.M),
        h=h,
        lam=INITIAL_LAMBDA,
        sigma_eps2=sigma_eps2,
        sigma_h2=sigma_h2,
    )
    if 'h' in overrides:
        state.h = np.array(overrides['h'], dtype=float)
    if 'q' in overrides:
        state.q = np.array(overrides['q'], dtype=bool)
        state.x = np.zeros(dims.M)
    if 'x' in overrides:
        state.x = np.array(overrides['x'], dtype=float)
        if 'q' not in overrides:
            state.q = state.x != 0.0
    if 'lambda' in overrides:
        state.lam = float(overrides['lambda'])
    if 'sigma_eps2' in overrides:
        state.sigma_eps2 = float(overrides['sigma_eps2'])
    if 'sigma_h2' in overrides:
        state.sigma_h2 = float(overrides['sigma_h2'])
    state.check(dims)
    return state


def step1(state: BgState, z: np.ndarray, op: ConvOperator, kind: SamplerKind,
          rng: np.random.Generator, context: ChainContext) -> BgState:
    """Dispatch Step 1 on (q, x) to the kernel of the sampler kind"""
    settings = context.settings
    if kind.variant == SamplerVariant.HYBRID:
        return step1_site(state, z, op, rng, settings.lam_clamp)
    if kind.variant == SamplerVariant.KTUPLE:
        return step1_ktuple(state, z, op, kind.K, rng, lam_clamp=settings.lam_clamp)

    new, ms = step1_marginal(state, z, op, rng, monitor=context.monitor,
                             lam_clamp=settings.lam_clamp, downdate_tol=settings.downdate_tol)
    context.counters.downdate_breakdowns += ms.breakdowns
    context.counters.refactorizations += ms.rebuilds
    context.sync_monitor()
    return new


def iterate(state: BgState, z: np.ndarray, op: ConvOperator, kind: SamplerKind,
            priors: Hyperpriors, rng: np.random.Generator,
            context: Optional[ChainContext] = None) -> BgState:
    """
    One full iteration of the sampler.

    The h conditional is drawn twice: once inside the shift move and once
    more as its own step, as the iteration is laid out.

    Args:
        state: current state, left untouched
        z: observations of length N
        op: operator providing the dimensions; its IR is replaced by state.h
        kind: sampler kind
        priors: hyperpriors
        rng: the chain's random generator
        context: per-chain settings and counters

    Returns:
        The new state
    """
    if z.shape != (op.dims.N,):
        raise DimensionError(f"Observations must have length N={op.dims.N}, got {z.shape}")
    context = context if context is not None else ChainContext()
    settings = context.settings

    new = step1(state, z, op.with_ir(state.h), kind, rng, context)
    new = timeshift_scale_move(new, z, op, kind.eta, rng, context.counters,
                               settings.gig_max_rejections)
    new.h = sample_h(new, z, op.signal_operator(new.x), rng)
    new.sigma_eps2 = sample_sigma_eps(new, z, op.with_ir(new.h), rng, priors)
    new.lam = sample_lambda(new, rng, priors, settings.lam_clamp)
    new.sigma_h2 = sample_sigma_h(new, rng, priors)
    return new
