"""
BG Deconvolution
Blind Bernoulli-Gaussian deconvolution by MCMC: hybrid, K-tuple and
partially marginalized Gibbs samplers with MPSRF diagnostics.
"""
from .diagnostics import (
    BgEstimate, ChainEnsemble, MpsrfTrace, estimate, first_visit, mpsrf, mpsrf_trace,
)
from .exceptions import (
    ConfigError, DeconvError, DiagnosticUndefinedError, DimensionError, DomainError,
    DowndateBreakdownError, FactorizationError, InvariantError, SamplerError, SingularityError,
)
from .model import (
    BgState, ConvOperator, Hyperpriors, ModelDims, benchmark_ir, convolve, generate_synthetic,
    log_joint_posterior, rescale_to_snr, snr_db,
)

__version__ = '1.0.0'
