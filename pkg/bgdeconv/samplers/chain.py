"""
BG Deconvolution Chain Runner
Runs one seeded chain and records its traces. Jobs are plain picklable
dataclasses so the command layer can ship them to worker processes.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..exceptions import DeconvError
from ..model import BgState, ConvOperator, Hyperpriors, ModelDims
from .kernel import ChainContext, SamplerKind, SamplerSettings, initial_state, iterate

logger = logging.getLogger(__name__)


@dataclass
class ChainTrace:
    """
    Recorded output of one chain.

    Arrays have one row per completed iteration; a chain stopped early by
    `stop_at` or by a numerical failure holds fewer rows than requested.
    """
    seed: int
    kind: str
    q: np.ndarray
    h: np.ndarray
    lam: np.ndarray
    sigma_eps2: np.ndarray
    sigma_h2: np.ndarray
    times: np.ndarray
    x_sum: np.ndarray
    x_count: int
    counters: Dict[str, int]
    final_state: Optional[BgState] = None
    first_visit: Optional[int] = None
    error: Optional[str] = None

    @property
    def iterations(self) -> int:
        return self.q.shape[0]

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def x_mean(self) -> Optional[np.ndarray]:
        """Running mean of x over the post-burn-in iterations"""
        if self.x_count == 0:
            return None
        return self.x_sum / self.x_count

    def params(self) -> np.ndarray:
        """Rows of (lambda, sigma_eps2, sigma_h2, h_0..h_P)"""
        return np.column_stack([self.lam, self.sigma_eps2, self.sigma_h2, self.h])


@dataclass
class ChainJob:
    """Everything a worker needs to run one chain"""
    z: np.ndarray
    dims: ModelDims
    kind: SamplerKind
    seed: int
    iterations: int
    burn_in: int
    priors: Hyperpriors = field(default_factory=Hyperpriors)
    settings: SamplerSettings = field(default_factory=SamplerSettings)
    init: Optional[Dict[str, Any]] = None
    stop_at: Optional[np.ndarray] = None


def run_chain(job: ChainJob) -> ChainTrace:
    """
    Run one chain from its seed.

    With `stop_at` set the chain halts at the first iteration whose q equals
    it and `first_visit` records that iteration (0 when the initial state
    already matches). Numerical failures are caught and reported in `error`
    with the traces recorded so far.
    """
    rng = np.random.default_rng(job.seed)
    dims = job.dims
    total = job.iterations
    q_trace = np.zeros((total, dims.M), dtype=bool)
    h_trace = np.zeros((total, dims.P + 1))
    lam = np.zeros(total)
    sigma_eps2 = np.zeros(total)
    sigma_h2 = np.zeros(total)
    times = np.zeros(total)
    x_sum = np.zeros(dims.M)
    x_count = 0
    context = ChainContext(settings=job.settings)
    first_visit = None
    error = None
    done = 0

    logger.info(f"Chain seed={job.seed} ({job.kind.label}) starting, {total} iterations")
    chain_started = time.perf_counter()
    state = initial_state(dims, rng, job.init)
    op = ConvOperator(dims, state.h)
    if job.stop_at is not None and np.array_equal(state.q, job.stop_at):
        first_visit = 0
    else:
        for k in range(total):
            started = time.perf_counter()
            try:
                state = iterate(state, job.z, op, job.kind, job.priors, rng, context)
            except (DeconvError, np.linalg.LinAlgError, FloatingPointError) as err:
                error = f"iteration {k}: {type(err).__name__}: {err}"
                logger.error(f"Chain seed={job.seed} ({job.kind.label}) failed at {error}")
                break
            times[k] = time.perf_counter() - started
            q_trace[k] = state.q
            h_trace[k] = state.h
            lam[k] = state.lam
            sigma_eps2[k] = state.sigma_eps2
            sigma_h2[k] = state.sigma_h2
            if k >= job.burn_in:
                x_sum += state.x
                x_count += 1
            done = k + 1
            if job.stop_at is not None and np.array_equal(state.q, job.stop_at):
                first_visit = done
                break

    logger.info(f"Chain seed={job.seed} ({job.kind.label}) finished {done} iterations "
                f"in {time.perf_counter() - chain_started:.2f}s")
    return ChainTrace(
        seed=job.seed,
        kind=job.kind.label,
        q=q_trace[:done],
        h=h_trace[:done],
        lam=lam[:done],
        sigma_eps2=sigma_eps2[:done],
        sigma_h2=sigma_h2[:done],
        times=times[:done],
        x_sum=x_sum,
        x_count=x_count,
        counters=context.counters.to_dict(),
        final_state=state,
        first_visit=first_visit,
        error=error,
    )


def run_chains(jobs: List[ChainJob], workers: int = 1) -> List[ChainTrace]:
    """
    Run jobs serially or on a process pool; traces come back in job order.

    The caller stays the only writer of anything on disk.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [run_chain(job) for job in jobs]

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_chain, jobs))
