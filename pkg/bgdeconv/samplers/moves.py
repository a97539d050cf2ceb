"""
BG Deconvolution Ambiguity Moves
Metropolis-Hastings circular time shift of (q, x) with h integrated out,
followed by the GIG resampling of the x/h scale.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..exceptions import SamplerError
from ..linalg import CholFactor
from ..model import BgState, ConvOperator
from .conjugate import draw_h, h_conditional
from .gig import GIG_MAX_REJECTIONS, sample_gig

logger = logging.getLogger(__name__)

HConditional = Tuple[CholFactor, np.ndarray]


@dataclass
class MoveCounters:
    """Per-chain bookkeeping of the shift and scale moves"""
    shifts_proposed: int = 0
    shifts_accepted: int = 0
    scale_skipped: int = 0
    gig_failures: int = 0


def propose_shift(eta: float, u: float) -> int:
    """+1 with probability eta, -1 with probability eta, 0 otherwise"""
    if u < eta:
        return 1
    if u < 2.0 * eta:
        return -1
    return 0


def conditional_log_ratio(current: HConditional, proposed: HConditional,
                          sigma_eps2: float) -> float:
    """
    rho = m''R'^-1 m' - m'R^-1 m + log |R'| / |R| from the (U, c) pairs of two
    h conditionals, twice the log ratio of their h-marginal likelihoods.
    """
    U, c = current
    U2, c2 = proposed
    return float((c2 @ c2 - c @ c) / sigma_eps2 ** 2 + U.logdet() - U2.logdet())


def shift_log_ratio(x: np.ndarray, shifted: np.ndarray, z: np.ndarray, op: ConvOperator,
                    sigma_eps2: float, sigma_h2: float) -> float:
    """rho between the spike trains x and shifted"""
    return conditional_log_ratio(
        h_conditional(op.signal_operator(x), z, sigma_eps2, sigma_h2),
        h_conditional(op.signal_operator(shifted), z, sigma_eps2, sigma_h2),
        sigma_eps2,
    )


def shift_move(state: BgState, z: np.ndarray, op: ConvOperator, eta: float,
               rng: np.random.Generator,
               counters: Optional[MoveCounters] = None) -> Tuple[BgState, HConditional]:
    """
    Metropolis-Hastings circular shift of (q, x) by +-1 with h integrated out.

    The state is modified in place.

    Returns:
        Tuple of (state, h conditional of the retained spike train)
    """
    counters = counters if counters is not None else MoveCounters()
    se2, sh2 = state.sigma_eps2, state.sigma_h2

    current = h_conditional(op.signal_operator(state.x), z, se2, sh2)
    shift = propose_shift(eta, rng.random())
    if shift:
        counters.shifts_proposed += 1
        x_shifted = np.roll(state.x, shift)
        proposed = h_conditional(op.signal_operator(x_shifted), z, se2, sh2)
        rho = conditional_log_ratio(current, proposed, se2)
        if 2.0 * math.log(rng.random()) < rho:
            counters.shifts_accepted += 1
            state.x = x_shifted
            state.q = np.roll(state.q, shift)
            current = proposed
    return state, current


def scale_move(state: BgState, rng: np.random.Generator,
               counters: Optional[MoveCounters] = None,
               max_rejections: int = GIG_MAX_REJECTIONS) -> BgState:
    """
    Resample the scale s with x -> x s and h -> h / s, s^2 ~ GIG((L - P - 1) / 2, alpha, beta).

    Skipped when x or h is zero, and when the GIG sampler gives up.
    """
    counters = counters if counters is not None else MoveCounters()
    alpha = float(state.x @ state.x) / state.sigma_x2
    beta = float(state.h @ state.h) / state.sigma_h2
    if alpha <= 0.0 or beta <= 0.0:
        counters.scale_skipped += 1
        return state

    lam_gig = (state.L - state.h.size) / 2.0
    try:
        s2 = sample_gig(lam_gig, alpha, beta, rng, max_rejections)
    except SamplerError as err:
        counters.gig_failures += 1
        logger.warning(f"Scale move skipped: {err}")
        return state
    s = math.sqrt(s2)
    state.x = state.x * s
    state.h = state.h / s
    return state


def timeshift_scale_move(state: BgState, z: np.ndarray, op: ConvOperator, eta: float,
                         rng: np.random.Generator, counters: Optional[MoveCounters] = None,
                         max_rejections: int = GIG_MAX_REJECTIONS) -> BgState:
    """
    Propose a circular shift of (q, x) by +-1, accept with 2 log(u) < rho,
    draw h from the conditional of the retained (q, x), then rescale.

    Args:
        state: current state
        z: observations
        op: operator providing the dimensions
        eta: probability of each shift direction, in (0, 1/2)
        rng: random generator
        counters: move bookkeeping, updated in place

    Returns:
        A new state
    """
    counters = counters if counters is not None else MoveCounters()
    new, (U, c) = shift_move(state.copy(), z, op, eta, rng, counters)
    new.h = draw_h(U, c, new.sigma_eps2, rng)
    return scale_move(new, rng, counters, max_rejections)
