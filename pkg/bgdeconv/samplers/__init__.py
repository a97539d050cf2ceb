"""
BG Deconvolution Samplers
Step 1 kernels, the shift/scale move, conjugate draws and the chain runner.
"""
from .chain import ChainJob, ChainTrace, run_chain, run_chains
from .conjugate import sample_h, sample_lambda, sample_sigma_eps, sample_sigma_h
from .gig import sample_gig
from .kernel import (
    ChainContext, ChainCounters, SamplerKind, SamplerSettings, SamplerVariant, initial_state,
    iterate,
)
from .ktuple import KTupleTables, ktuple_log_weights, step1_ktuple
from .marginal import MarginalState, step1_marginal
from .moves import (
    MoveCounters, conditional_log_ratio, scale_move, shift_log_ratio, shift_move,
    timeshift_scale_move,
)
from .site import site_log_odds, site_posterior_variance, step1_site

__all__ = [
    'ChainContext', 'ChainCounters', 'ChainJob', 'ChainTrace', 'KTupleTables', 'MarginalState',
    'MoveCounters', 'SamplerKind', 'SamplerSettings', 'SamplerVariant', 'conditional_log_ratio',
    'initial_state', 'iterate', 'ktuple_log_weights', 'run_chain', 'run_chains', 'sample_gig',
    'sample_h', 'sample_lambda', 'sample_sigma_eps', 'sample_sigma_h', 'scale_move',
    'shift_log_ratio', 'shift_move', 'site_log_odds', 'site_posterior_variance', 'step1_ktuple',
    'step1_marginal', 'step1_site', 'timeshift_scale_move',
]
