"""
Extended-Hilbert-space realisations of the dephasing mixtures.

A qubit (or a qubit pair) is coupled to a three-level classical register whose populations are
the mixing weights. The bipartite generator is time independent and of GKSL form; the register
never changes and never becomes entangled with the system.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .analytic import _check_time, channel_probs, mixture_map
from .errors import DimensionMismatchError, EmbeddingError, ValidationError
from .qubit_core import (
    PAULIS,
    PSD_TOL,
    DensityMatrix,
    MixtureWeights,
    block_swap_unitary,
    eigenbasis,
    partial_trace,
    reduce_operator,
    trace_distance,
    trace_norm,
)
from .stochastic import JumpStateReport

logger = logging.getLogger(__name__)

REGISTER_DIM = 3
FROZEN_TOL = 1e-10
COHERENCE_TOL = 1e-12
AGREEMENT_TOL = 1e-9
CONSTRAINT_TOL = 1e-8

# Register used by the six-qubit construction: four blocks of four levels
PURIFIER_DIM = 16
PURIFIER_BLOCK = 4


def register_projector(i: int) -> np.ndarray:
    """|i><i| on the three-level register, i = 1, 2, 3."""
    if i not in (1, 2, 3):
        raise ValidationError(f"Register index must be 1, 2 or 3, got {i}")
    proj = np.zeros((REGISTER_DIM, REGISTER_DIM), dtype=np.complex128)
    proj[i - 1, i - 1] = 1.0
    return proj


@dataclass(frozen=True)
class QuantumClassicalState:
    """
    State sum_i w_i rho_i (x) |i><i| with a classical register.

    Attributes:
        blocks: Tuples (rho_i, w_i, i) with distinct indices i in {1, 2, 3}
    """

    blocks: tuple[tuple[DensityMatrix, float, int], ...]

    def __post_init__(self) -> None:
        indices = [i for _, _, i in self.blocks]
        if len(set(indices)) != len(indices) or any(i not in (1, 2, 3) for i in indices):
            raise ValidationError(f"Register indices must be distinct, in 1..3, got {indices}")
        weights = [w for _, w, _ in self.blocks]
        if any(w < 0.0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValidationError(f"Block weights must be a probability vector, got {weights}")
        dims = {rho.dim for rho, _, _ in self.blocks}
        if len(dims) != 1:
            raise DimensionMismatchError(f"All blocks must share one dimension, got {sorted(dims)}")

    @property
    def system_dim(self) -> int:
        return self.blocks[0][0].dim

    @property
    def weights(self) -> np.ndarray:
        w = np.zeros(REGISTER_DIM)
        for _, weight, i in self.blocks:
            w[i - 1] = weight
        return w

    def to_matrix(self) -> np.ndarray:
        return sum(w * np.kron(rho.mat, register_projector(i)) for rho, w, i in self.blocks)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, system_dim: int) -> "QuantumClassicalState":
        """
        Read the diagonal register blocks of a bipartite state.

        Blocks with zero weight are dropped; register coherences are ignored (see
        ``register_coherence``).
        """
        d = system_dim
        tensor = np.asarray(mat).reshape(d, REGISTER_DIM, d, REGISTER_DIM)
        blocks = []
        for i in range(REGISTER_DIM):
            block = tensor[:, i, :, i]
            weight = float(np.trace(block).real)
            if weight > 1e-14:
                blocks.append((DensityMatrix(block / weight), weight, i + 1))
        total = sum(w for _, w, _ in blocks)
        return cls(tuple((rho, w / total, i) for rho, w, i in blocks))


def quantum_classical_state(rho0: DensityMatrix, x: MixtureWeights) -> QuantumClassicalState:
    """Initial product state rho0 (x) diag(x1, x2, x3); zero weights are left out."""
    weights = x.as_array()
    return QuantumClassicalState(
        tuple((rho0, float(w), i + 1) for i, w in enumerate(weights) if w > 0.0)
    )


def register_coherence(mat: np.ndarray, system_dim: int) -> float:
    """Largest entry of the off-diagonal register blocks."""
    tensor = np.asarray(mat).reshape(system_dim, REGISTER_DIM, system_dim, REGISTER_DIM)
    mask = 1.0 - np.eye(REGISTER_DIM)
    return float(np.max(np.abs(tensor * mask[None, :, None, :])))


def register_partial_transpose(mat: np.ndarray, system_dim: int) -> np.ndarray:
    tensor = np.asarray(mat).reshape(system_dim, REGISTER_DIM, system_dim, REGISTER_DIM)
    dim = system_dim * REGISTER_DIM
    return tensor.transpose(0, 3, 2, 1).reshape(dim, dim)


def lindblad_superoperator(jump_operators: np.ndarray) -> np.ndarray:
    """
    Dissipator sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2) as a matrix on row-major vec(rho).

    Uses vec(A X B) = (A (x) B^T) vec(X).
    """
    ops = np.asarray(jump_operators, dtype=np.complex128)
    dim = ops.shape[-1]
    eye = np.eye(dim)
    superop = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for op in ops:
        decay = op.conj().T @ op
        superop += np.kron(op, op.conj()) - 0.5 * (np.kron(decay, eye) + np.kron(eye, decay.T))
    return superop


@dataclass(frozen=True)
class BipartiteGenerator:
    """
    Time-independent GKSL generator on system (x) register.

    Jump operators are sigma_k (x) 1 (x) P_k; ``register_state`` is the frozen diag(x).
    """

    superoperator: np.ndarray
    jump_operators: np.ndarray
    register_state: np.ndarray
    system_dim: int

    @property
    def dim(self) -> int:
        return self.system_dim * REGISTER_DIM

    def apply(self, mat: np.ndarray) -> np.ndarray:
        return (self.superoperator @ np.asarray(mat).reshape(-1)).reshape(self.dim, self.dim)

    def evolve(self, mat: np.ndarray, t: float) -> np.ndarray:
        """exp(tL) applied to a bipartite operator."""
        propagator = expm(_check_time(t) * self.superoperator)
        return (propagator @ np.asarray(mat).reshape(-1)).reshape(self.dim, self.dim)


def build_bipartite_generator(x: MixtureWeights, system_dim: int = 2) -> BipartiteGenerator:
    """
    GKSL generator of the qubit-register embedding of the mixture x.

    The first qubit of the system is dephased along axis k when the register reads k; for
    ``system_dim=4`` the second qubit is a spectator. The generator itself does not depend on x,
    only the register state does.

    Raises:
        DimensionMismatchError: If system_dim is not 2 or 4
    """
    if system_dim not in (2, 4):
        raise DimensionMismatchError(f"System must be one or two qubits, got dim {system_dim}")
    spectator = np.eye(system_dim // 2)
    jump_operators = np.array(
        [np.kron(np.kron(PAULIS[k], spectator), register_projector(k)) for k in (1, 2, 3)]
    )
    superop = lindblad_superoperator(jump_operators)
    logger.debug(f"Bipartite generator of dim {superop.shape[0]} for x={x.format()}")
    return BipartiteGenerator(
        superoperator=superop,
        jump_operators=jump_operators,
        register_state=np.diag(x.as_array()).astype(np.complex128),
        system_dim=system_dim,
    )


@dataclass(frozen=True)
class EmbeddingReport:
    """Structure checks of an evolved quantum-classical state."""

    register_drift: float
    register_coherence: float
    min_partial_transpose_eigenvalue: float
    system_error: float

    @property
    def frozen(self) -> bool:
        return self.register_drift <= FROZEN_TOL

    @property
    def separable(self) -> bool:
        return (
            self.register_coherence <= COHERENCE_TOL
            and self.min_partial_transpose_eigenvalue >= -PSD_TOL
        )

    @property
    def ok(self) -> bool:
        return self.frozen and self.separable and self.system_error <= FROZEN_TOL


def evolve_embedded(
    rho0: DensityMatrix, x: MixtureWeights, t: float
) -> tuple[DensityMatrix, DensityMatrix, EmbeddingReport]:
    """
    Evolve rho0 (x) diag(x) under the bipartite generator and trace out either side.

    Args:
        rho0: Qubit state
        x: Mixing weights (the register populations)
        t: Time

    Returns:
        Tuple (system state, register state, structure report)

    Raises:
        DimensionMismatchError: If rho0 is not a qubit state
        GridError: If t is negative or not finite
    """
    if rho0.dim != 2:
        raise DimensionMismatchError(f"Embedding evolves a qubit, got dim {rho0.dim}")
    generator = build_bipartite_generator(x)
    state = generator.evolve(quantum_classical_state(rho0, x).to_matrix(), t)

    rho_s = partial_trace(state, [2, REGISTER_DIM], [0])
    rho_e = partial_trace(state, [2, REGISTER_DIM], [1])
    report = EmbeddingReport(
        register_drift=trace_norm(rho_e.mat - generator.register_state),
        register_coherence=register_coherence(state, 2),
        min_partial_transpose_eigenvalue=float(
            np.min(np.linalg.eigvalsh(register_partial_transpose(state, 2)))
        ),
        system_error=trace_distance(rho_s, mixture_map(x, rho0, t)),
    )
    if not report.ok:
        logger.warning(f"Embedded evolution failed structure checks at t={t}: {report}")
    logger.debug(f"Embedded evolution x={x.format()} t={t}: {report}")
    return rho_s, rho_e, report


def two_qubit_map(rho_ab: DensityMatrix, x: MixtureWeights, t: float) -> DensityMatrix:
    """
    (Lambda_t (x) id)[rho_ab]: the first qubit dephases, the second is frozen.

    Computed from the Kraus form sum_j p_j (sigma_j (x) 1) rho (sigma_j (x) 1) and checked
    against the reduced 12-dim bipartite evolution.

    Raises:
        DimensionMismatchError: If rho_ab is not a two-qubit state
        EmbeddingError: If the two routes disagree by more than 1e-9
    """
    if rho_ab.dim != 4:
        raise DimensionMismatchError(f"Two-qubit map needs a dim-4 state, got dim {rho_ab.dim}")
    probs = channel_probs(x, t).as_array()
    local = np.array([np.kron(PAULIS[j], PAULIS[0]) for j in range(4)])
    kraus = np.einsum("j,jab,bc,jcd->ad", probs, local, rho_ab.mat, local)

    generator = build_bipartite_generator(x, system_dim=4)
    state = generator.evolve(quantum_classical_state(rho_ab, x).to_matrix(), t)
    gksl = reduce_operator(state, [4, REGISTER_DIM], [0])

    discrepancy = float(np.max(np.abs(kraus - gksl)))
    if discrepancy > AGREEMENT_TOL:
        raise EmbeddingError(
            f"Kraus and GKSL two-qubit evolutions differ by {discrepancy:.3e} at t={t}"
        )
    logger.debug(f"Two-qubit map at t={t}: Kraus/GKSL discrepancy {discrepancy:.2e}")
    return DensityMatrix(kraus)


def jump_state_coefficients(rho_ab: DensityMatrix) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Coefficients c[i, k, l] of |xi_0> = sum c_ikl |phi_i>|k>|l> purifying rho_ab.

    The |phi_i> diagonalise rho_A; l runs over the four eigenvectors chi_l of rho_ab with
    c_ikl = sqrt(r_l) <phi_i, k|chi_l>.

    Returns:
        Tuple (coefficients of shape (2, 2, 4), phi basis as columns, constraint residual)
    """
    probs, chi = eigenbasis(rho_ab)
    rho_a = partial_trace(rho_ab, [2, 2], [0])
    _, phi = eigenbasis(rho_a)
    change = np.kron(phi, np.eye(2))
    flat = (change.conj().T @ chi) * np.sqrt(probs)[None, :]

    # sum_l c_ikl c*_i'k'l must reproduce <phi_i k|rho_ab|phi_i' k'>
    target = change.conj().T @ rho_ab.mat @ change
    residual = float(np.max(np.abs(flat @ flat.conj().T - target)))
    return flat.reshape(2, 2, PURIFIER_BLOCK), phi, residual


def six_qubit_jump_states(rho_ab: DensityMatrix) -> tuple[np.ndarray, JumpStateReport]:
    """
    Four orthonormal vectors in C^2 (x) C^2 (x) C^16 realising the jumps of the first qubit.

    |xi_j> = (sigma_j (x) 1 (x) V_j)|xi_0>, where V_j swaps register block 0 with block j.
    Tracing out B and the register gives sigma_j rho_A sigma_j; tracing out A and the register
    gives the same rho_B for every j.

    Returns:
        Tuple (vectors of shape (4, 64), residual report)

    Raises:
        DimensionMismatchError: If rho_ab is not a two-qubit state
        EmbeddingError: If the coefficient constraints or the post-hoc checks fail
    """
    if rho_ab.dim != 4:
        raise DimensionMismatchError(f"Six-qubit states need a dim-4 state, got dim {rho_ab.dim}")
    coeffs, phi, residual = jump_state_coefficients(rho_ab)
    if residual > CONSTRAINT_TOL:
        raise EmbeddingError(f"Coefficient constraints violated: residual {residual:.3e}")

    amplitudes = np.zeros((2, 2, PURIFIER_DIM), dtype=np.complex128)
    amplitudes[:, :, :PURIFIER_BLOCK] = np.einsum("ikl,ai->akl", coeffs, phi)
    xi0 = amplitudes.reshape(-1)

    ops = np.array(
        [
            np.kron(
                np.kron(PAULIS[j], PAULIS[0]),
                block_swap_unitary(PURIFIER_DIM, PURIFIER_BLOCK, j),
            )
            for j in range(4)
        ]
    )
    vectors = np.einsum("jab,b->ja", ops, xi0)

    dims = [2, 2, PURIFIER_DIM]
    rho_a = reduce_operator(rho_ab.mat, [2, 2], [0])
    rho_b = reduce_operator(rho_ab.mat, [2, 2], [1])
    gram = vectors.conj() @ vectors.T
    reduction = bystander = 0.0
    for j, v in enumerate(vectors):
        outer = np.outer(v, v.conj())
        expected = PAULIS[j] @ rho_a @ PAULIS[j]
        reduced_a = reduce_operator(outer, dims, [0])
        reduced_b = reduce_operator(outer, dims, [1])
        reduction = max(reduction, float(np.max(np.abs(reduced_a - expected))))
        bystander = max(bystander, float(np.max(np.abs(reduced_b - rho_b))))

    report = JumpStateReport(float(np.max(np.abs(gram - np.eye(4)))), reduction, bystander)
    if not report.ok:
        raise EmbeddingError(f"Six-qubit jump states failed residual checks: {report}")
    logger.debug(f"Six-qubit jump states: constraint residual {residual:.2e}, {report}")
    return vectors, report
