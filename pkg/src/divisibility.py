"""Markovianity classifiers for the mixture family and the two-qubit witness search."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from tqdm import tqdm

from .analytic import (
    CYCLIC,
    LambdaTriple,
    cpt_holds,
    lambda_values,
    probs_from_lambdas,
    rate_arrays,
)
from .errors import ContractViolationError, GridError
from .integrators import TimeGrid
from .qubit_core import (
    PAULIS,
    DensityMatrix,
    MixtureWeights,
    bell_states,
    random_density_matrix,
    random_pure_state,
    trace_norm,
    trace_norms,
)
from .rng import make_rng, progress_enabled

logger = logging.getLogger(__name__)

RATE_TOL = 1e-10
CHOI_TOL = 1e-12
BLP_TOL = 1e-8
WITNESS_TOL = 1e-7
FD_STEP = 1e-6

# sigma_j (x) 1 on two qubits
LOCAL_PAULIS = np.array([np.kron(p, PAULIS[0]) for p in PAULIS])


@dataclass(frozen=True)
class DivisibilityReport:
    """Per-time Markovianity flags of a mixture on a grid."""

    grid: TimeGrid
    cpt: np.ndarray
    cp_divisible: np.ndarray
    p_divisible: np.ndarray
    blp_monotone: np.ndarray
    geometric: np.ndarray
    first_negative_rate: tuple[int, float] | None = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.grid.times,
                "cpt": self.cpt,
                "cp_div": self.cp_divisible,
                "p_div": self.p_divisible,
                "blp": self.blp_monotone,
                "geometric": self.geometric,
            }
        )


@dataclass(frozen=True)
class IntermediateMap:
    """Pauli-diagonal propagator from s to t with multipliers xi_k = lambda_k(t)/lambda_k(s)."""

    xi1: float
    xi2: float
    xi3: float
    cp: bool
    p: bool

    @property
    def xi(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, self.xi3])


@dataclass(frozen=True)
class Witness:
    operator: np.ndarray
    s: float
    t: float
    derivative: float
    family: str
    traceless: bool


@dataclass(frozen=True)
class ViolationResult:
    max_derivative: float
    witness: Witness | None
    candidates_checked: int


def random_state_pairs(n_pairs: int, rng: np.random.Generator) -> np.ndarray:
    """Differences rho1 - rho2 of random qubit pairs, half pure and half mixed; shape (n, 2, 2)."""
    deltas = []
    for i in range(n_pairs):
        if i % 2 == 0:
            rho1, rho2 = random_pure_state(2, rng), random_pure_state(2, rng)
        else:
            rho1, rho2 = random_density_matrix(2, rng), random_density_matrix(2, rng)
        deltas.append(rho1.mat - rho2.mat)
    return np.array(deltas)


def _map_stack(probs: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Apply sum_j q_j sigma_j X sigma_j to every qubit operator in a stack (n, 2, 2)."""
    return np.einsum("j,jab,nbc,jcd->nad", probs, PAULIS, ops, PAULIS)


def blp_derivatives_batch(
    x: MixtureWeights, deltas: np.ndarray, t: float, h: float = FD_STEP
) -> np.ndarray:
    """
    d/dt ||Lambda_t[delta]||_1 for a stack of traceless Hermitian differences.

    Central differences with step h; one-sided forward differences when t < h.
    """
    weights = x.as_array()
    lo, hi = (t - h, t + h) if t >= h else (t, t + h)
    norms = [
        trace_norms(_map_stack(probs_from_lambdas(lambda_values(weights, tau)), deltas))
        for tau in (lo, hi)
    ]
    return (norms[1] - norms[0]) / (hi - lo)


def blp_derivative(
    x: MixtureWeights, rho1: DensityMatrix, rho2: DensityMatrix, t: float, h: float = FD_STEP
) -> float:
    """
    Rate of change of the trace distance between two evolved states.

    Raises:
        ContractViolationError: If the two states coincide
        GridError: If t is negative
    """
    if t < 0.0:
        raise GridError(f"Time must be non-negative, got {t}")
    delta = rho1.mat - rho2.mat
    if trace_norm(delta) < 1e-12:
        raise ContractViolationError("BLP derivative needs two distinct states")
    return float(blp_derivatives_batch(x, delta[None], t, h)[0])


def intermediate_map(x: MixtureWeights, s: float, t: float) -> IntermediateMap:
    """
    Propagator Lambda_{t,s} = Lambda_t Lambda_s^-1 of the mixture.

    Complete positivity is read off the Choi eigenvalues (1/4) H (1, xi) and positivity off
    |xi_k| <= 1.

    Raises:
        GridError: If not 0 <= s < t
        ContractViolationError: If some lambda_k(s) vanishes
    """
    if not 0.0 <= s < t:
        raise GridError(f"Intermediate map needs 0 <= s < t, got s={s}, t={t}")
    weights = x.as_array()
    lam_s = lambda_values(weights, s)
    if np.any(np.abs(lam_s) < 1e-300):
        raise ContractViolationError(f"Lambda_s is not invertible at s={s}")
    xi = lambda_values(weights, t) / lam_s
    choi = probs_from_lambdas(xi)
    return IntermediateMap(
        *(float(v) for v in xi),
        cp=bool(choi.min() >= -CHOI_TOL),
        p=bool(np.all(np.abs(xi) <= 1.0 + CHOI_TOL)),
    )


def classify(
    x: MixtureWeights,
    grid: TimeGrid,
    n_pairs: int = 1000,
    rng: np.random.Generator | None = None,
) -> DivisibilityReport:
    """
    Markovianity flags of the mixture at every grid time.

    Args:
        x: Mixture weights
        grid: Time grid
        n_pairs: Number of random state pairs for the BLP test
        rng: Generator for the state pairs (seed 0 when omitted)

    Returns:
        DivisibilityReport with cpt, CP-divisibility (all gamma_k >= -1e-10), P-divisibility
        (pairwise sums), BLP monotonicity and the geometric flag (gamma0 > 0)
    """
    rng = make_rng(0) if rng is None else rng
    times = grid.times
    weights = x.as_array()
    logger.info(f"Classifying x={weights} on {times.size} times with {n_pairs} BLP pairs")

    gammas, _ = rate_arrays(weights[None, :], times)
    lams = lambda_values(weights, times)
    pair_sums = np.stack([gammas[:, j] + gammas[:, k] for j, k in CYCLIC], axis=1)

    cpt = np.array([cpt_holds(LambdaTriple(t, *lam)) for t, lam in zip(times, lams, strict=True)])
    cp_div = np.all(gammas >= -RATE_TOL, axis=1)
    p_div = np.all(pair_sums >= -RATE_TOL, axis=1)
    geometric = gammas.sum(axis=1) > 0.0

    deltas = random_state_pairs(n_pairs, rng)
    blp = np.array(
        [
            bool(blp_derivatives_batch(x, deltas, t).max() <= BLP_TOL)
            for t in tqdm(times, desc="BLP", disable=not progress_enabled())
        ]
    )

    first_negative = None
    negative = np.argwhere(gammas < -RATE_TOL)
    if negative.size:
        row, col = negative[0]
        first_negative = (int(col) + 1, float(times[row]))
        logger.info(f"gamma_{col + 1} first negative at t={times[row]:.6g}")

    return DivisibilityReport(grid, cpt, cp_div, p_div, blp, geometric, first_negative)


def witness_candidates(n_random: int, rng: np.random.Generator) -> tuple[np.ndarray, list[str]]:
    """
    Hermitian two-qubit test operators and their family labels.

    Bell projectors, traceless Bell differences, weighted Bell differences and random GUE samples.
    """
    bell = bell_states()
    projectors = np.array([np.outer(v, v.conj()) for v in bell])
    ops: list[np.ndarray] = []
    families: list[str] = []

    for j in range(4):
        ops.append(projectors[j])
        families.append(f"bell-projector-{j}")
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            if i < j:
                ops.append(projectors[i] - projectors[j])
                families.append(f"bell-difference-{i}{j}")
            for w in (0.25, 0.75):
                ops.append(w * projectors[i] - (1.0 - w) * projectors[j])
                families.append(f"weighted-bell-difference-{i}{j}-{w:g}")
    for n in range(n_random):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        herm = 0.5 * (g + g.conj().T)
        ops.append(herm / trace_norm(herm))
        families.append(f"random-hermitian-{n}")
    return np.array(ops), families


def _extended_norms(weights: np.ndarray, s: float, t: np.ndarray, conj: np.ndarray) -> np.ndarray:
    """||(Lambda_{t,s} (x) id) X||_1 for precomputed P_j X P_j stacks (4, n, 4, 4)."""
    xi = lambda_values(weights, t) / lambda_values(weights, s)
    q = probs_from_lambdas(xi)
    return trace_norms(np.einsum("j,jnab->nab", q, conj))


def _extended_derivatives(
    weights: np.ndarray, s: float, t: float, ops: np.ndarray, h: float = FD_STEP
) -> np.ndarray:
    conj = np.einsum("jab,nbc,jcd->jnad", LOCAL_PAULIS, ops, LOCAL_PAULIS)
    lo = max(t - h, s)
    hi = t + h
    return (_extended_norms(weights, s, hi, conj) - _extended_norms(weights, s, lo, conj)) / (
        hi - lo
    )


def _hermitian_from_params(params: np.ndarray) -> np.ndarray:
    real = params[:16].reshape(4, 4)
    imag = params[16:].reshape(4, 4)
    g = real + 1j * imag
    return 0.5 * (g + g.conj().T)


def two_qubit_violation(
    x: MixtureWeights,
    s_grid: np.ndarray,
    t_grid: np.ndarray,
    n_random: int = 200,
    seed: int = 0,
    refine: bool = True,
    tol: float = WITNESS_TOL,
) -> ViolationResult:
    """
    Search for a witness that Lambda_{t,s} (x) id is not positive.

    A witness X makes ||(Lambda_{t,s} (x) id) X||_1 grow with t. Candidates are scored by
    derivative / ||X||_1 on every pair s < t of the two grids, and the best one is refined over
    all Hermitian X with Nelder-Mead.

    Args:
        x: Mixture weights
        s_grid: Start times
        t_grid: End times (pairs with t <= s are skipped)
        n_random: Number of random Hermitian candidates
        seed: Seed of the random candidates
        refine: Whether to run the local refinement
        tol: Smallest derivative counted as a violation

    Returns:
        ViolationResult with the largest derivative found and its witness (None below ``tol``)
    """
    weights = x.as_array()
    ops, families = witness_candidates(n_random, make_rng(seed))
    scale = trace_norms(ops)
    pairs = [(float(s), float(t)) for s in s_grid for t in t_grid if t > s + FD_STEP]
    if not pairs:
        raise GridError("Witness search needs at least one pair s < t")
    logger.info(f"Witness search over {len(ops)} operators and {len(pairs)} (s, t) pairs")

    best = (-np.inf, 0, 0.0, 0.0)
    for s, t in tqdm(pairs, desc="witness search", disable=not progress_enabled()):
        scores = _extended_derivatives(weights, s, t, ops) / scale
        idx = int(np.argmax(scores))
        if scores[idx] > best[0]:
            best = (float(scores[idx]), idx, s, t)

    value, idx, s, t = best
    operator = ops[idx] / scale[idx]
    family = families[idx]

    if refine:
        start = np.concatenate([operator.real.ravel(), operator.imag.ravel()])

        def objective(params: np.ndarray) -> float:
            herm = _hermitian_from_params(params)
            norm = trace_norm(herm)
            if norm < 1e-12:
                return 0.0
            return -float(_extended_derivatives(weights, s, t, herm[None])[0]) / norm

        result = minimize(
            objective, start, method="Nelder-Mead", options={"maxiter": 2000, "xatol": 1e-9}
        )
        if -result.fun > value:
            value = float(-result.fun)
            herm = _hermitian_from_params(result.x)
            operator = herm / trace_norm(herm)
            family = f"refined-{family}"
        logger.debug(f"Refinement finished after {result.nit} iterations: {value:.6g}")

    if value <= tol:
        logger.info(f"No violation above {tol:g} (best {value:.3e})")
        return ViolationResult(value, None, len(ops) * len(pairs))

    traceless = bool(abs(np.trace(operator)) < 1e-10)
    logger.info(f"Violation {value:.6g} at s={s:.4g}, t={t:.4g} by {family}")
    return ViolationResult(
        value, Witness(operator, s, t, value, family, traceless), len(ops) * len(pairs)
    )
