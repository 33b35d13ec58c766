"""Closed-form dynamics of mixtures of Pauli dephasing semigroups."""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ContractViolationError, GridError, ValidationError
from .qubit_core import (
    HADAMARD4,
    PAULIS,
    DensityMatrix,
    MixtureWeights,
    PauliChannelProbs,
    pauli_map,
)

logger = logging.getLogger(__name__)

KernelConvention = Literal["rederived", "paper"]
KERNEL_CONVENTIONS: tuple[str, ...] = ("rederived", "paper")

# Pairs (j, k) completing each index i to a cyclic triple
CYCLIC = ((1, 2), (0, 2), (0, 1))


@dataclass(frozen=True)
class LambdaTriple:
    """Bloch multipliers lambda_k(t) of a Pauli-diagonal map at time t."""

    t: float
    l1: float
    l2: float
    l3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l1, self.l2, self.l3], dtype=np.float64)


@dataclass(frozen=True)
class RateDiagnostics:
    """
    Decoherence rates of the time-local master equation at one time.

    The master equation reads d(rho)/dt = 1/2 sum_k gamma_k (sigma_k rho sigma_k - rho); the mu_k
    are half the logarithmic derivatives of the Bloch multipliers, and gamma0 is the total rate.
    """

    t: float
    mu1: float
    mu2: float
    mu3: float
    gamma1: float
    gamma2: float
    gamma3: float
    gamma0: float

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2, self.gamma3], dtype=np.float64)

    @property
    def mus(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.mu3], dtype=np.float64)

    @classmethod
    def from_gammas(cls, t: float, gammas: np.ndarray) -> "RateDiagnostics":
        """Build diagnostics from rates alone; mu_i = -(gamma_j + gamma_k)/2."""
        g = np.asarray(gammas, dtype=np.float64)
        mus = [-0.5 * (g[j] + g[k]) for j, k in CYCLIC]
        return cls(t, *(float(m) for m in mus), *(float(v) for v in g), float(g.sum()))


@dataclass(frozen=True)
class KernelComponents:
    """
    Memory kernel K(t) = K_loc delta(t) + K_nloc(t) of the mixture dynamics.

    Both parts are Pauli-diagonal in the form 1/2 sum_k c_k (sigma_k rho sigma_k - rho): the
    local part with constant coefficients ``loc_weights``, the smooth part with coefficients
    eta_k(t). On Bloch component i the kernel acts as -(w_j + w_k) delta(t) + X_i(t) with
    X_i(t) = amplitudes[i] * exp(-decays[i] * t) and eta_i = (X_i - X_j - X_k)/2.
    """

    loc_weights: tuple[float, float, float]
    amplitudes: tuple[float, float, float]
    decays: tuple[float, float, float]
    convention: str

    def local_rates(self) -> np.ndarray:
        """Instantaneous decay rate w_j + w_k of each Bloch component."""
        w = np.asarray(self.loc_weights)
        return np.array([w[j] + w[k] for j, k in CYCLIC])

    def X(self, t: float | np.ndarray) -> np.ndarray:
        """Memory functions X_k(t); shape (3,) + shape(t)."""
        t = np.asarray(t, dtype=np.float64)
        amp = np.asarray(self.amplitudes).reshape((3,) + (1,) * t.ndim)
        dec = np.asarray(self.decays).reshape((3,) + (1,) * t.ndim)
        return amp * np.exp(-dec * t)

    def eta(self, t: float | np.ndarray) -> np.ndarray:
        xs = self.X(t)
        return 0.5 * np.stack([xs[i] - xs[j] - xs[k] for i, (j, k) in enumerate(CYCLIC)])


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise GridError(f"Time must be finite and non-negative, got {t}")
    return t


def _check_times(t: float | np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)) or np.any(t < 0.0):
        raise GridError(f"Times must be finite and non-negative, got min {np.min(t)}")
    return t


def lambda_values(x: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """Vectorised lambda_k = x_k + (1 - x_k) exp(-2t) for weights of shape (..., 3)."""
    decay = np.exp(-2.0 * np.asarray(t, dtype=np.float64))[..., None]
    return x + (1.0 - x) * decay


def lambdas(x: MixtureWeights, t: float) -> LambdaTriple:
    """Bloch multipliers of the mixture map at time t."""
    t = _check_time(t)
    l1, l2, l3 = lambda_values(x.as_array(), t)
    return LambdaTriple(t, float(l1), float(l2), float(l3))


def channel_probs(x: MixtureWeights, t: float) -> PauliChannelProbs:
    """
    Pauli channel probabilities p0 = (1 + e^{-2t})/2, p_k = x_k (1 - e^{-2t})/2.

    Args:
        x: Mixture weights
        t: Time (in units of the dephasing rate)

    Returns:
        PauliChannelProbs of the mixture map at time t
    """
    t = _check_time(t)
    decay = np.exp(-2.0 * t)
    p0 = 0.5 * (1.0 + decay)
    pk = 0.5 * x.as_array() * (1.0 - decay)
    return PauliChannelProbs(p0, *(float(v) for v in pk))


def mu_values(x: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """
    mu_k = -(1 - x_k)/(1 - x_k + e^{2t} x_k), evaluated in the overflow-free scaled form.

    Edges x_k = 0 give exactly -1 for every t.
    """
    decay = np.exp(-2.0 * np.asarray(t, dtype=np.float64))[..., None]
    num = (1.0 - x) * decay
    den = num + x
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = -num / den
    return np.where(x == 0.0, -1.0, mu)


def rate_arrays(x: np.ndarray, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorised rates for many simplex points.

    Args:
        x: Weights of shape (..., 3)
        t: Time, scalar or broadcastable against x[..., 0]

    Returns:
        Tuple (gammas, mus), each of shape (..., 3)

    Raises:
        GridError: If any time is negative or not finite
    """
    mu = mu_values(np.asarray(x, dtype=np.float64), _check_times(t))
    total = mu.sum(axis=-1, keepdims=True)
    gammas = 2.0 * mu - total
    return gammas, mu


def scaled_rate_arrays(x: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """
    Rates multiplied by e^{2t}, shape (..., 3).

    Interior rates decay like e^{-2t}; the scaled values converge to -1/x_i + 1/x_j + 1/x_k - 1
    and keep their sign where the plain rates underflow.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[..., None]
    decay = np.exp(-2.0 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = -(1.0 - x) / ((1.0 - x) * decay + x)
    mu = np.where(x == 0.0, -np.exp(2.0 * t), mu)
    return 2.0 * mu - mu.sum(axis=-1, keepdims=True)


def rates(x: MixtureWeights, t: float) -> RateDiagnostics:
    """
    Decoherence rates gamma_i = mu_i - mu_j - mu_k of the mixture at time t.

    Raises:
        GridError: If t is negative or not finite
    """
    t = _check_time(t)
    gammas, mus = rate_arrays(x.as_array(), t)
    return RateDiagnostics(
        t,
        *(float(m) for m in mus),
        *(float(g) for g in gammas),
        float(gammas.sum()),
    )


def enm_rates(t: float) -> RateDiagnostics:
    """Rates (1, 1, -tanh t) of the eternally non-Markovian master equation."""
    t = _check_time(t)
    tanh = np.tanh(t)
    mu12 = -0.5 * (1.0 - tanh)
    return RateDiagnostics(t, mu12, mu12, -1.0, 1.0, 1.0, -tanh, 2.0 - tanh)


def rate_function(x: MixtureWeights) -> Callable[[float], RateDiagnostics]:
    """Rate callback ``t -> rates(x, t)`` for the integrators."""

    def rate_fn(t: float) -> RateDiagnostics:
        return rates(x, t)

    return rate_fn


def integrated_rates(x: MixtureWeights, t: float) -> np.ndarray:
    """Closed-form Gamma_k(t) = int_0^t gamma_k, from Gamma_i = (ln l_i - ln l_j - ln l_k)/2."""
    t = _check_time(t)
    log_l = np.log(lambda_values(x.as_array(), t))
    return np.array([0.5 * (log_l[i] - log_l[j] - log_l[k]) for i, (j, k) in enumerate(CYCLIC)])


def dephasing_solution(rho0: DensityMatrix, axis: np.ndarray, t: float) -> DensityMatrix:
    """
    Markov dephasing along ``axis``: (1 + e^{-2t})/2 rho0 + (1 - e^{-2t})/2 s rho0 s, s = n.sigma.

    Raises:
        ContractViolationError: If ``axis`` is not a unit vector within 1e-12
    """
    t = _check_time(t)
    n = np.asarray(axis, dtype=np.float64)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ContractViolationError(f"Dephasing axis must be a unit 3-vector, got {axis}")
    if rho0.dim != 2:
        raise ContractViolationError(f"Dephasing acts on a qubit, got dim {rho0.dim}")

    s = np.einsum("k,kij->ij", n, PAULIS[1:])
    decay = np.exp(-2.0 * t)
    mat = 0.5 * (1.0 + decay) * rho0.mat + 0.5 * (1.0 - decay) * (s @ rho0.mat @ s)
    return DensityMatrix(mat)


def mixture_map(x: MixtureWeights, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Semigroup mixture sum_k x_k exp(t L_k)[rho0], summed over the Cartesian axes."""
    mat = sum(
        weight * dephasing_solution(rho0, axis, t).mat
        for weight, axis in zip(x.as_array(), np.eye(3), strict=True)
    )
    return DensityMatrix(mat)


def evolve_state(x: MixtureWeights, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Mixture map through its channel probabilities."""
    p = channel_probs(x, t)
    return DensityMatrix(pauli_map(p.as_array(), rho0.mat))


def kernel_components(
    x: MixtureWeights, convention: KernelConvention = "rederived"
) -> KernelComponents:
    """
    Memory-kernel components of the mixture.

    ``rederived`` inverts the Laplace transform of each lambda_i exactly, giving local weights
    2 x_k and X_k(t) = 4 x_k (1 - x_k) exp(-2 x_k t). ``paper`` returns the printed components,
    local weights x_k and X_k(t) = x_k (1 - x_k) exp(-x_k t), which generate lambda_k(t/2).

    Raises:
        ValidationError: If the convention is unknown
    """
    if convention not in KERNEL_CONVENTIONS:
        raise ValidationError(
            f"Invalid kernel convention: {convention}. Must be one of {KERNEL_CONVENTIONS}"
        )
    scale = 2.0 if convention == "rederived" else 1.0
    xs = x.as_array()
    return KernelComponents(
        loc_weights=tuple(float(v) for v in scale * xs),
        amplitudes=tuple(float(v) for v in scale**2 * xs * (1.0 - xs)),
        decays=tuple(float(v) for v in scale * xs),
        convention=convention,
    )


def cpt_holds(lam: LambdaTriple, tol: float = 1e-12) -> bool:
    """
    Complete-positivity conditions of a Pauli-diagonal map.

    l_j + l_k <= 1 + l_i for every cyclic triple and l_1 + l_2 + l_3 >= -1; together they say
    that all four Pauli weights are non-negative.
    """
    values = lam.as_array()
    if values.sum() < -1.0 - tol:
        return False
    return all(values[j] + values[k] <= 1.0 + values[i] + tol for i, (j, k) in enumerate(CYCLIC))


def probs_from_lambdas(lam: np.ndarray) -> np.ndarray:
    """Channel probabilities (1/4) H (1, l1, l2, l3); accepts stacks of shape (..., 3)."""
    lam = np.asarray(lam, dtype=np.float64)
    full = np.concatenate([np.ones(lam.shape[:-1] + (1,)), lam], axis=-1)
    return 0.25 * full @ HADAMARD4.T
