"""
BG Deconvolution Site Sampler
Single-site Gibbs sweep over (q_i, x_i) pairs with the residual kept up to date.
"""
import math

import numpy as np
from scipy.special import expit

from ..model import BgState, ConvOperator
from .conjugate import LAMBDA_CLAMP, clamp_lambda


def site_posterior_variance(sigma_eps2: float, sigma_x2: float, norm2: float) -> float:
    """sigma_1^2 = sigma_eps2 sigma_x2 / (sigma_eps2 + sigma_x2 ||h||^2)"""
    return sigma_eps2 * sigma_x2 / (sigma_eps2 + sigma_x2 * norm2)


def site_log_odds(mu: float, sigma1_2: float, sigma_x2: float, lam: float) -> float:
    """
    log(lambda_i / (1 - lambda_i)) for the inclusion of one site.

    lambda_i = nu_i / (nu_i + 1 - lambda) with
    nu_i = lambda (sigma_1 / sigma_x) exp(mu^2 / (2 sigma_1^2)).
    """
    return (math.log(lam) + 0.5 * math.log(sigma1_2 / sigma_x2)
            + 0.5 * mu * mu / sigma1_2 - math.log1p(-lam))


def step1_site(state: BgState, z: np.ndarray, op: ConvOperator, rng: np.random.Generator,
               lam_clamp: float = LAMBDA_CLAMP) -> BgState:
    """
    Sweep i = 0..M-1 drawing (q_i, x_i) from their joint conditional.

    For each site the residual without site i is e_i = z - H x + h_i x_i; then
    q_i ~ Bernoulli(lambda_i), x_i ~ N(mu_i, sigma_1^2) if q_i = 1 else 0.

    Returns:
        A new state; the input is left untouched
    """
    new = state.copy()
    h = op.h
    taps = op.dims.P + 1
    sigma_eps2, sigma_x2 = new.sigma_eps2, new.sigma_x2
    lam = clamp_lambda(new.lam, lam_clamp)

    sigma1_2 = site_posterior_variance(sigma_eps2, sigma_x2, op.norm2)
    sigma1 = math.sqrt(sigma1_2)
    gain = sigma1_2 / sigma_eps2

    residual = z - op.matvec(new.x)
    for i in range(op.dims.M):
        segment = residual[i:i + taps] + h * new.x[i]
        mu = gain * float(h @ segment)
        if rng.random() < expit(site_log_odds(mu, sigma1_2, sigma_x2, lam)):
            new.q[i] = True
            new.x[i] = mu + sigma1 * rng.standard_normal()
        else:
            new.q[i] = False
            new.x[i] = 0.0
        residual[i:i + taps] = segment - h * new.x[i]
    return new
