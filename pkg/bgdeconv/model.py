"""
BG Deconvolution Model
Bernoulli-Gaussian generative model, zero-boundary convolution operators,
conjugate priors and the joint posterior density.

Everything here is plain numpy/scipy; the module never touches Django so it
can be shipped to worker processes as-is.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg, stats

from .exceptions import DimensionError, DomainError, InvariantError

logger = logging.getLogger(__name__)

# cos(k * pi / 4) for k mod 8, exact zeros where the cosine vanishes
_COS_QUARTER_PI = np.array([1.0, np.sqrt(0.5), 0.0, -np.sqrt(0.5),
                            -1.0, -np.sqrt(0.5), 0.0, np.sqrt(0.5)])


@dataclass(frozen=True)
class ModelDims:
    """
    Observation, spike-train and impulse-response sizes.

    Args:
        N: observation length
        M: spike-train length, always N - P
        P: IR order (the IR has P + 1 taps)
    """
    N: int
    M: int
    P: int

    def __post_init__(self):
        if not (self.N > self.P >= 0):
            raise DimensionError(f"Need N > P >= 0, got N={self.N}, P={self.P}")
        if self.M != self.N - self.P:
            raise DimensionError(f"Zero boundary requires M = N - P, got M={self.M}")
        if self.M < 1:
            raise DimensionError("Spike train must have at least one sample")

    @classmethod
    def from_signal(cls, M: int, P: int) -> 'ModelDims':
        """Build dims from the spike-train length and IR order"""
        return cls(N=M + P, M=M, P=P)

    def to_dict(self) -> Dict[str, int]:
        return {'N': self.N, 'M': self.M, 'P': self.P}


@dataclass(frozen=True)
class Hyperpriors:
    """IG(shape, scale) priors on the variances and Be(a, b) on lambda"""
    ig_shape_eps: float = 1.0
    ig_scale_eps: float = 1.0
    ig_shape_h: float = 1.0
    ig_scale_h: float = 1.0
    beta_a: float = 1.0
    beta_b: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise DomainError(f"Hyperprior {name} must be strictly positive, got {value}")


@dataclass
class BgState:
    """
    Parameter state of one chain: (q, x, h, lambda, sigma_eps2, sigma_h2).

    sigma_x2 is fixed to one and only kept so that the formulas read the same
    as their derivations.
    """
    q: np.ndarray
    x: np.ndarray
    h: np.ndarray
    lam: float
    sigma_eps2: float
    sigma_h2: float
    sigma_x2: float = field(default=1.0)

    @property
    def L(self) -> int:
        """Number of active spikes"""
        return int(np.count_nonzero(self.q))

    def copy(self) -> 'BgState':
        return replace(self, q=self.q.copy(), x=self.x.copy(), h=self.h.copy())

    def check(self, dims: Optional[ModelDims] = None) -> None:
        """
        Validate the type invariants.

        Raises:
            DimensionError: vector lengths disagree with dims
            InvariantError: an inactive site carries a non-zero amplitude
            DomainError: lambda or a variance is out of range
        """
        if dims is not None:
            if self.q.shape != (dims.M,) or self.x.shape != (dims.M,):
                raise DimensionError(f"q and x must have length M={dims.M}")
            if self.h.shape != (dims.P + 1,):
                raise DimensionError(f"h must have length P+1={dims.P + 1}")
        if np.any(self.x[~self.q] != 0.0):
            raise InvariantError("Inactive sites must carry zero amplitude")
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.sigma_eps2 <= 0 or self.sigma_h2 <= 0 or self.sigma_x2 <= 0:
            raise DomainError("Variances must be strictly positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'q': self.q.astype(int).tolist(),
            'x': self.x.tolist(),
            'h': self.h.tolist(),
            'lambda': self.lam,
            'sigma_eps2': self.sigma_eps2,
            'sigma_h2': self.sigma_h2,
            'sigma_x2': self.sigma_x2,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BgState':
        return cls(
            q=np.asarray(data['q'], dtype=bool),
            x=np.asarray(data['x'], dtype=float),
            h=np.asarray(data['h'], dtype=float),
            lam=float(data['lambda']),
            sigma_eps2=float(data['sigma_eps2']),
            sigma_h2=float(data['sigma_h2']),
            sigma_x2=float(data.get('sigma_x2', 1.0)),
        )


class ConvOperator:
    """
    Zero-boundary convolution by a finite impulse response.

    Represents the N x M Toeplitz matrix H without forming it. Products are
    computed with numpy's direct convolution/correlation, which is exact for
    the short IRs used here.
    """

    def __init__(self, dims: ModelDims, h: np.ndarray):
        h = np.array(h, dtype=float)
        if h.shape != (dims.P + 1,):
            raise DimensionError(f"IR must have P+1={dims.P + 1} taps, got {h.shape}")
        h.setflags(write=False)
        self.dims = dims
        self.h = h
        self._autocorr: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"ConvOperator(N={self.dims.N}, M={self.dims.M}, P={self.dims.P})"

    @property
    def norm2(self) -> float:
        """Squared norm of the IR, equal to every diagonal entry of H'H"""
        return float(self.h @ self.h)

    def with_ir(self, h: np.ndarray) -> 'ConvOperator':
        return ConvOperator(self.dims, h)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """H x, length N"""
        if x.shape != (self.dims.M,):
            raise DimensionError(f"Expected a length-{self.dims.M} vector, got {x.shape}")
        return np.convolve(x, self.h)

    def rmatvec(self, e: np.ndarray) -> np.ndarray:
        """H' e, length M"""
        if e.shape != (self.dims.N,):
            raise DimensionError(f"Expected a length-{self.dims.N} vector, got {e.shape}")
        return np.correlate(e, self.h, mode='valid')

    def column(self, i: int) -> np.ndarray:
        """i-th column of H: the IR placed at offset i"""
        col = np.zeros(self.dims.N)
        col[i:i + self.dims.P + 1] = self.h
        return col

    def autocorrelation(self) -> np.ndarray:
        """r[k] = sum_n h_n h_{n+k} for k = 0..P"""
        if self._autocorr is None:
            self._autocorr = np.correlate(self.h, self.h, mode='full')[self.dims.P:]
        return self._autocorr

    def gram_entries(self, offsets: np.ndarray) -> np.ndarray:
        """(H'H)[i, j] for |i - j| given as an integer array; zero beyond P"""
        offsets = np.abs(np.asarray(offsets))
        r = self.autocorrelation()
        out = np.zeros(offsets.shape)
        inside = offsets <= self.dims.P
        out[inside] = r[offsets[inside]]
        return out

    def gram(self) -> np.ndarray:
        """Dense M x M Toeplitz matrix H'H"""
        return linalg.toeplitz(self.gram_entries(np.arange(self.dims.M)))

    def matrix(self) -> np.ndarray:
        """Dense N x M matrix H"""
        first_col = np.zeros(self.dims.N)
        first_col[:self.dims.P + 1] = self.h
        first_row = np.zeros(self.dims.M)
        first_row[0] = self.h[0]
        return linalg.toeplitz(first_col, first_row)

    def signal_operator(self, x: np.ndarray) -> 'ConvOperator':
        """
        The operator X built from a spike train, such that H x = X h.

        X is itself a zero-boundary convolution whose kernel is x and whose
        input is the IR, so it reuses this class with the roles swapped.
        """
        if x.shape != (self.dims.M,):
            raise DimensionError(f"Expected a length-{self.dims.M} vector, got {x.shape}")
        swapped = ModelDims(N=self.dims.N, M=self.dims.P + 1, P=self.dims.M - 1)
        return ConvOperator(swapped, x)


def convolve(op: ConvOperator, x: np.ndarray) -> np.ndarray:
    """Noiseless observation z_n = sum_k h_k x_{n-k} under the zero boundary"""
    return op.matvec(x)


def benchmark_ir(P: int = 20) -> np.ndarray:
    """
    The 21-tap benchmark IR h(i) = cos((i - 10) pi / 4) exp(-|0.225 i - 2|^1.5).

    Raises:
        DomainError: for any order other than 20
    """
    if P != 20:
        raise DomainError(f"The benchmark IR is defined for P = 20 only, got {P}")
    i = np.arange(P + 1)
    return _COS_QUARTER_PI[(i - 10) % 8] * np.exp(-np.abs(0.225 * i - 2.0) ** 1.5)


def log_joint_posterior(state: BgState, z: np.ndarray, op: ConvOperator,
                        priors: Hyperpriors = Hyperpriors()) -> float:
    """
    Unnormalized log of the joint posterior of all parameters.

    The amplitude prior g(x; sigma_x2 diag(q)) is degenerate; it is evaluated
    over active sites only, inactive amplitudes being exactly zero.

    Raises:
        InvariantError: q/x inconsistency
        DomainError: lambda or a variance out of range
    """
    state.check(op.dims)
    dims = op.dims
    L = state.L
    residual = z - op.matvec(state.x)

    log_lik = -0.5 * dims.N * np.log(2 * np.pi * state.sigma_eps2) \
        - 0.5 * (residual @ residual) / state.sigma_eps2
    x_active = state.x[state.q]
    log_x = -0.5 * L * np.log(2 * np.pi * state.sigma_x2) \
        - 0.5 * (x_active @ x_active) / state.sigma_x2
    log_h = -0.5 * (dims.P + 1) * np.log(2 * np.pi * state.sigma_h2) \
        - 0.5 * (state.h @ state.h) / state.sigma_h2
    log_q = L * np.log(state.lam) + (dims.M - L) * np.log1p(-state.lam)
    log_hyper = (
        stats.invgamma.logpdf(state.sigma_h2, priors.ig_shape_h, scale=priors.ig_scale_h)
        + stats.beta.logpdf(state.lam, priors.beta_a, priors.beta_b)
        + stats.invgamma.logpdf(state.sigma_eps2, priors.ig_shape_eps, scale=priors.ig_scale_eps)
    )
    return float(log_lik + log_x + log_h + log_q + log_hyper)


def generate_synthetic(dims: ModelDims, lam: float, sigma_eps2: float, h: np.ndarray,
                       seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw a BG spike train and its noisy convolution.

    Args:
        dims: model dimensions
        lam: Bernoulli rate in (0, 1)
        sigma_eps2: noise variance, zero for noiseless data
        h: impulse response of length P + 1
        seed: generator seed; the output is bit-reproducible for a fixed seed

    Returns:
        Tuple of (z, q_true, x_true)
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if sigma_eps2 < 0:
        raise DomainError(f"Noise variance must be non-negative, got {sigma_eps2}")

    rng = np.random.default_rng(seed)
    op = ConvOperator(dims, h)
    q = rng.random(dims.M) < lam
    amplitudes = rng.standard_normal(dims.M)
    x = np.where(q, amplitudes, 0.0)
    noise = rng.standard_normal(dims.N)
    z = op.matvec(x)
    if sigma_eps2 > 0:
        z = z + np.sqrt(sigma_eps2) * noise
    return z, q, x


def snr_db(z_noiseless: np.ndarray, sigma_eps2: float) -> float:
    """
    Signal-to-noise ratio 10 log10((||z||^2 / N) / sigma_eps2) in dB.

    The signal power is that of the noiseless observation.
    """
    if sigma_eps2 <= 0:
        raise DomainError("SNR is infinite for a zero noise variance")
    power = float(z_noiseless @ z_noiseless) / z_noiseless.size
    return 10.0 * np.log10(power / sigma_eps2)


def rescale_to_snr(x: np.ndarray, op: ConvOperator, sigma_eps2: float,
                   target_db: float) -> Tuple[np.ndarray, float]:
    """
    Scale spike amplitudes so that the noiseless data reach a target SNR.

    Returns:
        Tuple of (scaled x, scale factor)
    """
    z0 = op.matvec(x)
    power = float(z0 @ z0) / z0.size
    if power == 0.0:
        raise DomainError("Cannot rescale an all-zero spike train")
    scale = float(np.sqrt(sigma_eps2 * 10.0 ** (target_db / 10.0) / power))
    return x * scale, scale


def marginal_objective(q: np.ndarray, z: np.ndarray, op: ConvOperator, sigma_eps2: float,
                       lam: float) -> float:
    """
    f(q) = z'B^-1 z + log|B| + 2 L log(1/lambda - 1) with B = H diag(q) H' + sigma_eps2 I.

    Dense O(N^3) evaluation; -f/2 is the log of the q-marginal up to a constant.
    """
    H = op.matrix()
    Hq = H[:, np.asarray(q, dtype=bool)]
    B = Hq @ Hq.T + sigma_eps2 * np.eye(op.dims.N)
    sign, logdet = np.linalg.slogdet(B)
    if sign <= 0:
        raise DomainError("B is not positive definite")
    quad = z @ np.linalg.solve(B, z)
    L = int(np.count_nonzero(q))
    return float(quad + logdet + 2.0 * L * np.log(1.0 / lam - 1.0))


def enumerate_q_posterior(z: np.ndarray, op: ConvOperator, sigma_eps2: float,
                          lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact law of q given (h, sigma_eps2, lambda, z) over all 2^M patterns.

    Only meant for tiny instances.

    Returns:
        Tuple of (patterns as a 2^M x M boolean array, probabilities)
    """
    M = op.dims.M
    if M > 16:
        raise DimensionError(f"Enumeration over 2^{M} patterns is not supported")
    patterns = np.array(list(itertools.product([False, True], repeat=M)), dtype=bool)
    log_w = np.array([-0.5 * marginal_objective(p, z, op, sigma_eps2, lam) for p in patterns])
    log_w -= log_w.max()
    w = np.exp(log_w)
    return patterns, w / w.sum()
