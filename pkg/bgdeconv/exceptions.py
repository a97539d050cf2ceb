"""
BG Deconvolution Errors
Exception hierarchy shared by the numerical package and the command layer
"""


class DeconvError(Exception):
    """Base class for every error raised by bgdeconv"""


class DimensionError(DeconvError, ValueError):
    """Vector or matrix length does not match the model dimensions"""


class InvariantError(DeconvError, ValueError):
    """A state violates q_i = 0 => x_i = 0"""


class DomainError(DeconvError, ValueError):
    """A parameter lies outside its admissible domain"""


class FactorizationError(DeconvError):
    """Cholesky factorization met a non-positive pivot"""

    def __init__(self, pivot: int, message: str = ''):
        self.pivot = pivot
        super().__init__(message or f"Matrix is not positive definite (pivot {pivot})")


class SingularityError(DeconvError):
    """Triangular solve against a zero diagonal entry"""


class DowndateBreakdownError(DeconvError):
    """Rank-1 downdate would leave a non positive-definite product"""

    def __init__(self, rho2: float):
        self.rho2 = rho2
        super().__init__(f"Cholesky downdate breakdown (rho^2 = {rho2:.3e})")


class SamplerError(DeconvError):
    """A rejection sampler exceeded its rejection budget"""


class DiagnosticUndefinedError(DeconvError):
    """Convergence diagnostic cannot be evaluated on the given chains"""


class ConfigError(DeconvError):
    """Experiment configuration is inconsistent"""
