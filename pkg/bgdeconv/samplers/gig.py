"""
BG Deconvolution GIG Sampler
Generalized inverse Gaussian variates by Devroye's log-concave rejection
scheme: a flat envelope around the mode with exponential tails on each side.

GIG(lambda, alpha, beta) has density proportional to
u^(lambda - 1) exp(-(alpha u + beta / u) / 2) on u > 0.
"""
import logging
import math

import numpy as np

from ..exceptions import DomainError, SamplerError

logger = logging.getLogger(__name__)

GIG_MAX_REJECTIONS = 10000
# below this omega the law is numerically a gamma or an inverse gamma
_OMEGA_FLOOR = 1e-12


def _psi(x: float, alpha: float, lam: float) -> float:
    return -alpha * (math.cosh(x) - 1.0) - lam * (math.exp(x) - x - 1.0)


def _dpsi(x: float, alpha: float, lam: float) -> float:
    return -alpha * math.sinh(x) - lam * (math.exp(x) - 1.0)


def _right_cut(alpha: float, lam: float) -> float:
    x = -_psi(1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        return 1.0
    if alpha == 0.0 and lam == 0.0:
        return 1.0
    if x > 2.0:
        return math.sqrt(2.0 / (alpha + lam))
    return math.log(4.0 / (alpha + 2.0 * lam))


def _left_cut(alpha: float, lam: float) -> float:
    x = -_psi(-1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        return 1.0
    if alpha == 0.0 and lam == 0.0:
        return 1.0
    if x > 2.0:
        return math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    if alpha == 0.0:
        return 1.0 / lam
    tail = math.log(1.0 + 1.0 / alpha + math.sqrt(1.0 / alpha ** 2 + 2.0 / alpha))
    if lam == 0.0:
        return tail
    return min(1.0 / lam, tail)


def _standard_gig(lam: float, omega: float, rng: np.random.Generator,
                  max_rejections: int) -> float:
    """Draw from gig(lam, omega) with lam >= 0, density ~ u^(lam-1) exp(-omega (u + 1/u) / 2)"""
    # sqrt(omega^2 + lam^2) - lam without cancellation
    alpha = omega ** 2 / (math.sqrt(omega ** 2 + lam ** 2) + lam)

    t = _right_cut(alpha, lam)
    s = _left_cut(alpha, lam)

    eta = -_psi(t, alpha, lam)
    zeta = -_dpsi(t, alpha, lam)
    theta = -_psi(-s, alpha, lam)
    xi = _dpsi(-s, alpha, lam)

    p = 1.0 / xi
    r = 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd
    total = p + q + r

    for _ in range(max_rejections):
        u, v, w = rng.random(3)
        if u < q / total:
            x = -sd + q * v
        elif u < (q + r) / total:
            x = td - r * math.log(v)
        else:
            x = -sd + p * math.log(v)

        if x > td:
            envelope = math.exp(-eta - zeta * (x - t))
        elif x < -sd:
            envelope = math.exp(-theta + xi * (x + s))
        else:
            envelope = 1.0
        if w * envelope <= math.exp(_psi(x, alpha, lam)):
            ratio = lam / omega
            return math.exp(x) * (ratio + math.sqrt(1.0 + ratio ** 2))

    raise SamplerError(f"GIG rejection sampler exceeded {max_rejections} proposals "
                       f"(lambda={lam}, omega={omega})")


def sample_gig(lam: float, alpha: float, beta: float, rng: np.random.Generator,
               max_rejections: int = GIG_MAX_REJECTIONS) -> float:
    """
    Draw one GIG(lam, alpha, beta) variate.

    Args:
        lam: real shape index
        alpha: coefficient of u, strictly positive
        beta: coefficient of 1/u, strictly positive
        rng: random generator
        max_rejections: proposal budget before giving up

    Returns:
        A strictly positive variate

    Raises:
        DomainError: alpha or beta is not strictly positive
        SamplerError: no proposal accepted within the budget
    """
    if not (alpha > 0.0 and beta > 0.0):
        raise DomainError(f"GIG needs alpha > 0 and beta > 0, got alpha={alpha}, beta={beta}")

    omega = math.sqrt(alpha * beta)
    if omega < _OMEGA_FLOOR and lam != 0.0:
        if lam > 0:
            return float(rng.gamma(lam, 2.0 / alpha))
        return float(1.0 / rng.gamma(-lam, 2.0 / beta))

    swap = lam < 0
    draw = _standard_gig(abs(lam), omega, rng, max_rejections)
    if swap:
        draw = 1.0 / draw
    return float(draw * math.sqrt(beta / alpha))
