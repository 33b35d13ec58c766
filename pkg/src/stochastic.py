"""Monte Carlo realisations: random unitaries, random directions and classical jump processes."""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.integrate import quad
from scipy.optimize import root

from .errors import EmbeddingError, ValidationError
from .integrators import TimeGrid, TrajectoryRecord
from .qubit_core import (
    HADAMARD4,
    PAULIS,
    DensityMatrix,
    MixtureWeights,
    block_swap_unitary,
    bloch_components,
    eigenbasis,
    reduce_operator,
)
from .rng import DEFAULT_CHUNK_SIZE, run_chunked

logger = logging.getLogger(__name__)

DirectionKind = Literal["discrete-axes", "gaussian-anisotropic", "uniform-sphere"]
DIRECTION_KINDS: tuple[str, ...] = ("discrete-axes", "gaussian-anisotropic", "uniform-sphere")
RUMode = Literal["exact-phase", "pathwise"]
RU_MODES: tuple[str, ...] = ("exact-phase", "pathwise")

ANCILLA_DIM = 8
ORTHONORMALITY_TOL = 1e-12
REDUCTION_TOL = 1e-10


@dataclass(frozen=True)
class DirectionSpec:
    """Distribution of the random dephasing direction n with second moments <n_k^2> = x_k."""

    kind: str
    weights: MixtureWeights | None = None

    def __post_init__(self) -> None:
        if self.kind not in DIRECTION_KINDS:
            raise ValidationError(
                f"Invalid direction kind: {self.kind}. Must be one of {DIRECTION_KINDS}"
            )
        if self.kind == "uniform-sphere":
            object.__setattr__(self, "weights", MixtureWeights(1 / 3, 1 / 3, 1 / 3))
        elif self.weights is None:
            raise ValidationError(f"Direction kind '{self.kind}' needs mixture weights")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    from_state: int
    to_state: int


@dataclass(frozen=True)
class JumpStateReport:
    """Post-hoc residuals of an orthogonal jump-state construction."""

    orthonormality_error: float
    reduction_error: float
    bystander_error: float | None = None

    @property
    def ok(self) -> bool:
        return (
            self.orthonormality_error <= ORTHONORMALITY_TOL
            and self.reduction_error <= REDUCTION_TOL
            and (self.bystander_error is None or self.bystander_error <= REDUCTION_TOL)
        )


def anisotropic_moments(variances: np.ndarray) -> np.ndarray:
    """
    Exact second moments E[g_k^2 / |g|^2] of a normalised zero-mean Gaussian g.

    Uses E[g_k^2/|g|^2] = int_0^inf v_k (1 + 2 s v_k)^-1 prod_j (1 + 2 s v_j)^-1/2 ds.
    """
    v = np.asarray(variances, dtype=np.float64)

    def integrand(s: float, k: int) -> float:
        return v[k] / (1.0 + 2.0 * s * v[k]) / np.sqrt(np.prod(1.0 + 2.0 * s * v))

    return np.array(
        [quad(integrand, 0.0, np.inf, args=(k,))[0] if v[k] > 0.0 else 0.0 for k in range(3)]
    )


def calibrate_anisotropic_variances(x: MixtureWeights) -> np.ndarray:
    """
    Gaussian variances whose normalised samples have second moments exactly x.

    Normalising N(0, diag(x)) pulls the moments towards the isotropic point, so the variances are
    solved for with ``scipy.optimize.root`` (log-parametrised, summing to 1). Zero weights stay
    zero.

    Raises:
        ValidationError: If the moment equations cannot be solved
    """
    target = x.as_array()
    free = np.flatnonzero(target > 0.0)
    if free.size <= 1 or np.allclose(target[free], target[free][0]):
        return target.copy()

    def residual(log_v: np.ndarray) -> np.ndarray:
        v = np.zeros(3)
        v[free] = np.exp(log_v)
        moments = anisotropic_moments(v)
        return np.concatenate([(moments - target)[free[:-1]], [v.sum() - 1.0]])

    sol = root(residual, np.log(target[free]), method="hybr", options={"xtol": 1e-13})
    if not sol.success or np.max(np.abs(sol.fun)) > 1e-9:
        raise ValidationError(f"Variance calibration failed for x={target}: {sol.message}")
    variances = np.zeros(3)
    variances[free] = np.exp(sol.x)
    logger.debug(f"Calibrated variances {variances} for weights {target}")
    return variances


def sample_directions(spec: DirectionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw ``n`` unit dephasing directions.

    Args:
        spec: Direction distribution
        n: Number of samples
        rng: Random generator

    Returns:
        Array of shape (n, 3) with unit rows
    """
    if spec.kind == "discrete-axes":
        axes = rng.choice(3, size=n, p=spec.weights.as_array())
        signs = rng.choice([-1.0, 1.0], size=n)
        out = np.zeros((n, 3))
        out[np.arange(n), axes] = signs
        return out

    if spec.kind == "uniform-sphere":
        g = rng.standard_normal((n, 3))
    else:
        g = rng.standard_normal((n, 3)) * np.sqrt(calibrate_anisotropic_variances(spec.weights))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_direction(spec: DirectionSpec, rng: np.random.Generator) -> np.ndarray:
    return sample_directions(spec, 1, rng)[0]


def _exact_phase_bloch(
    b0: np.ndarray, t: float, spec: DirectionSpec, rng: np.random.Generator, n: int
) -> np.ndarray:
    directions = sample_directions(spec, n, rng)
    phases = rng.normal(0.0, np.sqrt(t), size=n)
    # U = cos(phi) 1 - i sin(phi) n.sigma
    unitaries = (
        np.cos(phases)[:, None, None] * PAULIS[0]
        - 1j * np.sin(phases)[:, None, None] * np.einsum("nk,kij->nij", directions, PAULIS[1:])
    )
    rho0 = 0.5 * (PAULIS[0] + np.einsum("k,kij->ij", b0, PAULIS[1:]))
    evolved = unitaries @ rho0 @ np.conj(np.swapaxes(unitaries, -1, -2))
    return bloch_components(evolved)


def _pathwise_bloch(
    b0: np.ndarray, t: float, spec: DirectionSpec, rng: np.random.Generator, n: int, h: float
) -> np.ndarray:
    """Stratonovich Heun scheme for d(rho) = -i[n.sigma, rho] o dW on Bloch vectors."""
    directions = sample_directions(spec, n, rng)
    steps = max(1, int(np.ceil(t / h)))
    dt = t / steps
    b = np.broadcast_to(b0, (n, 3)).copy()
    for _ in range(steps):
        dw = rng.normal(0.0, np.sqrt(dt), size=(n, 1))
        drift = 2.0 * np.cross(directions, b)
        predictor = b + drift * dw
        b = b + 0.5 * (drift + 2.0 * np.cross(directions, predictor)) * dw
    return b


def ru_evolve(
    rho0: DensityMatrix,
    t: float,
    spec: DirectionSpec,
    n_traj: int,
    rng: np.random.Generator,
    mode: RUMode = "exact-phase",
    h: float = 1e-3,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> tuple[DensityMatrix, np.ndarray]:
    """
    Average of random-unitary trajectories driven by white noise along random directions.

    ``exact-phase`` samples the accumulated phase phi ~ N(0, t) and applies
    U = cos(phi) 1 - i sin(phi) n.sigma directly; ``pathwise`` integrates each trajectory with a
    Stratonovich Heun step of size ``h``.

    Args:
        rho0: Initial qubit state
        t: Final time
        spec: Direction distribution
        n_traj: Number of trajectories
        rng: Parent random generator
        mode: Sampling mode
        h: Step size for the pathwise mode
        chunk_size: Trajectories per random stream

    Returns:
        Tuple (state estimate, standard errors of the three Bloch components)

    Raises:
        ValidationError: If n_traj < 1, t < 0 or the mode is unknown
    """
    if n_traj < 1:
        raise ValidationError(f"Need at least one trajectory, got {n_traj}")
    if t < 0.0:
        raise ValidationError(f"Time must be non-negative, got {t}")
    if mode not in RU_MODES:
        raise ValidationError(f"Invalid random-unitary mode: {mode}. Must be one of {RU_MODES}")
    if rho0.dim != 2:
        raise ValidationError(f"Random-unitary evolution acts on a qubit, got dim {rho0.dim}")

    b0 = bloch_components(rho0.mat)
    if mode == "exact-phase":

        def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
            return _exact_phase_bloch(b0, t, spec, gen, n)

    else:

        def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
            return _pathwise_bloch(b0, t, spec, gen, n, h)

    acc = run_chunked(sampler, n_traj, rng, chunk_size, desc=f"{mode} trajectories")
    mean = acc.mean
    estimate = 0.5 * (PAULIS[0] + np.einsum("k,kij->ij", mean, PAULIS[1:]))
    return DensityMatrix(estimate), acc.stderr


def gillespie(x: MixtureWeights, t_end: float, rng: np.random.Generator) -> list[JumpEvent]:
    """
    One trajectory of the classical jump process 0 <-> k.

    Every state is left at rate 1; from 0 the destination k is drawn with probability x_k, from
    k the destination is always 0.
    """
    if t_end <= 0.0:
        raise ValidationError(f"End time must be positive, got {t_end}")
    weights = x.as_array()
    events: list[JumpEvent] = []
    state, clock = 0, 0.0
    while True:
        clock += rng.exponential(1.0)
        if clock > t_end:
            break
        target = int(rng.choice(3, p=weights)) + 1 if state == 0 else 0
        events.append(JumpEvent(clock, state, target))
        state = target
    return events


def occupation_times(events: list[JumpEvent], t_end: float) -> np.ndarray:
    """Total time spent in each state 0..3 on [0, t_end]."""
    spent = np.zeros(4)
    state, last = 0, 0.0
    for event in events:
        spent[state] += event.time - last
        state, last = event.to_state, event.time
    spent[state] += t_end - last
    return spent


def empirical_generator(events: list[JumpEvent], t_end: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Rate-matrix estimate from one long trajectory.

    Returns:
        Tuple (generator, standard errors): off-diagonal entry [to, from] is the jump count divided
        by the time spent in ``from``, with Poisson error sqrt(count)/time; columns sum to 0
    """
    counts = np.zeros((4, 4))
    for event in events:
        counts[event.to_state, event.from_state] += 1.0
    spent = occupation_times(events, t_end)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.where(spent > 0.0, counts / spent, 0.0)
        errors = np.where(spent > 0.0, np.sqrt(counts) / spent, 0.0)
    rates[np.diag_indices(4)] = -rates.sum(axis=0)
    return rates, errors


def run_jump_batch(
    x: MixtureWeights,
    times: np.ndarray,
    n: int,
    rng: np.random.Generator,
    carry: np.ndarray,
    apply_jump: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    observe: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """
    Vectorised jump process for ``n`` independent runs, observed on a time grid.

    Args:
        x: Mixture weights (branching probabilities out of state 0)
        times: Increasing observation times starting at or after 0
        n: Number of runs
        rng: Random generator
        carry: Per-run payload transformed at every jump, stacked along axis 0
        apply_jump: ``apply_jump(carry, from, to, mask)`` returning the carry after the jumps of
            the runs selected by ``mask``
        observe: Maps the carry to per-run observations, stacked along axis 0

    Returns:
        Observations of shape (n, len(times), ...)
    """
    weights = x.as_array()
    t_max = times[-1]
    first = observe(carry)
    out = np.empty((n, times.size) + first.shape[1:], dtype=first.dtype)

    state = np.zeros(n, dtype=np.int64)
    clock = np.zeros(n)
    active = np.ones(n, dtype=bool)
    while active.any():
        following = clock + rng.exponential(1.0, size=n)
        window = (
            (times[None, :] >= clock[:, None])
            & (times[None, :] < following[:, None])
            & active[:, None]
        )
        if window.any():
            rows, cols = np.nonzero(window)
            out[rows, cols] = observe(carry)[rows]

        branch = rng.choice(3, size=n, p=weights) + 1
        target = np.where(state == 0, branch, 0)
        jumping = active & (following <= t_max)
        carry = apply_jump(carry, state, target, jumping)
        state = np.where(jumping, target, state)
        clock = following
        active = jumping
    return out


def _jump_labels(
    x: MixtureWeights, times: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    def relabel(carry, _from, to, mask):
        return np.where(mask, to, carry)

    return run_jump_batch(x, times, n, rng, np.zeros(n, dtype=np.int64), relabel, lambda c: c)


def sample_occupations(
    x: MixtureWeights,
    times: np.ndarray,
    n_runs: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Empirical occupation probabilities of states 0..3 at each time.

    Returns:
        Tuple (probabilities, standard errors), each of shape (len(times), 4)
    """
    times = np.asarray(times, dtype=np.float64)

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        labels = _jump_labels(x, times, n, gen)
        return (labels[..., None] == np.arange(4)).astype(np.float64)

    acc = run_chunked(sampler, n_runs, rng, chunk_size, desc="jump runs")
    return acc.mean, acc.stderr


def jump_ensemble(
    x: MixtureWeights,
    rho0: DensityMatrix,
    grid: TimeGrid,
    n_runs: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> TrajectoryRecord:
    """
    Ensemble of classical jump trajectories carrying the quantum labels sigma_s rho0 sigma_s.

    A run in state s contributes the Bloch vector H[k, s] * b_k(0), so the ensemble average is
    sum_s P_s(t) sigma_s rho0 sigma_s.
    """
    if n_runs < 1:
        raise ValidationError(f"Need at least one run, got {n_runs}")
    times = grid.times
    b0 = bloch_components(rho0.mat)
    label_bloch = HADAMARD4[1:, :].T * b0  # (4 labels, 3)

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        onehot = (_jump_labels(x, times, n, gen)[..., None] == np.arange(4)).astype(np.float64)
        return np.concatenate([onehot, onehot @ label_bloch], axis=-1)

    acc = run_chunked(sampler, n_runs, rng, chunk_size, desc="jump runs")
    mean, err = acc.mean, acc.stderr
    states = 0.5 * (PAULIS[0] + np.einsum("nk,kij->nij", mean[:, 4:], PAULIS[1:]))
    return TrajectoryRecord(
        method="jump",
        times=times,
        states=states,
        probs=mean[:, :4],
        stderr=err[:, 4:],
        samples=n_runs,
    )


def jump_unitaries(ancilla_dim: int = ANCILLA_DIM, block: int = 2) -> np.ndarray:
    """Operators sigma_k (x) U_k, k = 0..3, with U_k swapping ancilla block 0 and block k."""
    return np.array(
        [np.kron(PAULIS[k], block_swap_unitary(ancilla_dim, block, k)) for k in range(4)]
    )


def extended_jump_states(rho0: DensityMatrix) -> tuple[np.ndarray, JumpStateReport]:
    """
    Four orthonormal vectors in C^2 (x) C^8 whose reduced states are sigma_k rho0 sigma_k.

    With rho0 = sum_i p_i |phi_i><phi_i|, Psi_0 = sum_i sqrt(p_i) |phi_i>|i> and
    Psi_k = (sigma_k (x) U_k) Psi_0; the ancilla supports of the four vectors are disjoint.

    Returns:
        Tuple (vectors of shape (4, 16), residual report)

    Raises:
        EmbeddingError: If the post-hoc residuals exceed their tolerances
    """
    if rho0.dim != 2:
        raise ValidationError(f"Extended jump states need a qubit state, got dim {rho0.dim}")
    probs, basis = eigenbasis(rho0)
    psi0 = sum(
        np.sqrt(p) * np.kron(basis[:, i], np.eye(ANCILLA_DIM)[i]) for i, p in enumerate(probs)
    )
    vectors = np.einsum("kij,j->ki", jump_unitaries(), psi0)

    gram = vectors.conj() @ vectors.T
    ortho = float(np.max(np.abs(gram - np.eye(4))))
    reduction = max(
        float(
            np.max(
                np.abs(
                    reduce_operator(np.outer(v, v.conj()), [2, ANCILLA_DIM], [0])
                    - PAULIS[k] @ rho0.mat @ PAULIS[k]
                )
            )
        )
        for k, v in enumerate(vectors)
    )
    report = JumpStateReport(ortho, reduction)
    if not report.ok:
        raise EmbeddingError(f"Extended jump states failed residual checks: {report}")
    return vectors, report


def simulate_extended_jumps(
    x: MixtureWeights,
    rho0: DensityMatrix,
    grid: TimeGrid,
    n_runs: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> TrajectoryRecord:
    """
    Jump process on the orthogonal extended states.

    Each run starts in Psi_0; a jump between 0 and k applies sigma_k (x) U_k to the 16-dim
    vector. The reduced qubit states are averaged over runs.
    """
    if n_runs < 1:
        raise ValidationError(f"Need at least one run, got {n_runs}")
    times = grid.times
    vectors, _ = extended_jump_states(rho0)
    ops = jump_unitaries()

    def apply_jump(carry, origin, target, mask):
        label = np.maximum(origin, target)
        moved = np.einsum("nij,nj->ni", ops[label], carry)
        return np.where(mask[:, None], moved, carry)

    def observe(carry):
        blocks = carry.reshape(-1, 2, ANCILLA_DIM)
        reduced = np.einsum("nai,nbi->nab", blocks, blocks.conj())
        return bloch_components(reduced)

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        start = np.broadcast_to(vectors[0], (n, vectors.shape[1])).copy()
        return run_jump_batch(x, times, n, gen, start, apply_jump, observe)

    acc = run_chunked(sampler, n_runs, rng, chunk_size, desc="extended jump runs")
    states = 0.5 * (PAULIS[0] + np.einsum("nk,kij->nij", acc.mean, PAULIS[1:]))
    return TrajectoryRecord(
        method="jump-extended",
        times=times,
        states=states,
        stderr=acc.stderr,
        samples=n_runs,
    )
