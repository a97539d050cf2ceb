"""
BG Deconvolution Conjugate Draws
Gaussian draw of the impulse response and the IG/Beta hyperparameter draws.
"""
from typing import Tuple

import numpy as np
from scipy import stats

from ..linalg import CholFactor, cholesky, solve_lower_transpose, solve_upper
from ..model import BgState, ConvOperator, Hyperpriors

LAMBDA_CLAMP = 1e-12


def clamp_lambda(lam: float, eps: float = LAMBDA_CLAMP) -> float:
    """Keep lambda inside [eps, 1 - eps] so that log(1/lambda - 1) stays finite"""
    return float(min(max(lam, eps), 1.0 - eps))


def h_conditional(x_op: ConvOperator, z: np.ndarray, sigma_eps2: float,
                  sigma_h2: float) -> Tuple[CholFactor, np.ndarray]:
    """
    Precision factor and whitened data of the Gaussian conditional of h.

    S = X'X / sigma_eps2 + I / sigma_h2 = U'U and c = U'^-1 X'z, so that
    h ~ N(U^-1 c / sigma_eps2, S^-1).

    Args:
        x_op: operator X built from the current spike train
    """
    taps = x_op.dims.M
    S = x_op.gram() / sigma_eps2 + np.eye(taps) / sigma_h2
    U = cholesky(S)
    c = solve_lower_transpose(U, x_op.rmatvec(z))
    return U, c


def draw_h(U: CholFactor, c: np.ndarray, sigma_eps2: float,
           rng: np.random.Generator) -> np.ndarray:
    return solve_upper(U, c / sigma_eps2 + rng.standard_normal(U.L))


def sample_h(state: BgState, z: np.ndarray, op_from_x: ConvOperator,
             rng: np.random.Generator) -> np.ndarray:
    """
    Draw h from N(m, R) with R^-1 = X'X / sigma_eps2 + I / sigma_h2 and m = R X'z / sigma_eps2.

    Args:
        state: current state (variances are read from it)
        z: observations
        op_from_x: the X operator of the current spike train
        rng: random generator
    """
    U, c = h_conditional(op_from_x, z, state.sigma_eps2, state.sigma_h2)
    return draw_h(U, c, state.sigma_eps2, rng)


def sample_sigma_eps(state: BgState, z: np.ndarray, op: ConvOperator, rng: np.random.Generator,
                     priors: Hyperpriors = Hyperpriors()) -> float:
    """sigma_eps2 ~ IG(N/2 + a, ||z - Hx||^2 / 2 + b)"""
    residual = z - op.matvec(state.x)
    shape = op.dims.N / 2.0 + priors.ig_shape_eps
    scale = 0.5 * float(residual @ residual) + priors.ig_scale_eps
    return float(stats.invgamma.rvs(shape, scale=scale, random_state=rng))


def sample_lambda(state: BgState, rng: np.random.Generator,
                  priors: Hyperpriors = Hyperpriors(), eps: float = LAMBDA_CLAMP) -> float:
    """lambda ~ Be(a + L, b + M - L), clamped away from 0 and 1"""
    L = state.L
    M = state.q.size
    draw = stats.beta.rvs(priors.beta_a + L, priors.beta_b + M - L, random_state=rng)
    return clamp_lambda(float(draw), eps)


def sample_sigma_h(state: BgState, rng: np.random.Generator,
                   priors: Hyperpriors = Hyperpriors()) -> float:
    """sigma_h2 ~ IG(P/2 + a, ||h||^2 / 2 + b)"""
    P = state.h.size - 1
    shape = P / 2.0 + priors.ig_shape_h
    scale = 0.5 * float(state.h @ state.h) + priors.ig_scale_h
    return float(stats.invgamma.rvs(shape, scale=scale, random_state=rng))
