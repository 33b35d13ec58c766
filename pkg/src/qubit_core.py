"""Dense complex linear algebra and the Pauli/Bloch data model for one and two qubits."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    InvalidStateError,
    InvalidWeightsError,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
PROB_TOL = 1e-12

# sigma_0 = identity, then sigma_1, sigma_2, sigma_3
PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)

# Characters of the Klein four-group, one per row
HADAMARD4 = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class DensityMatrix:
    """
    Hermitian, unit-trace, positive semidefinite matrix.

    The constructor symmetrizes ``mat`` as (X + X^dagger)/2 before validating, so round-off
    asymmetry is absorbed while genuinely invalid input is rejected.

    Raises:
        InvalidStateError: If the matrix is not square, not finite, not Hermitian within 1e-12,
            has trace away from 1 by more than 1e-12, or an eigenvalue below -1e-10.
    """

    mat: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.mat, dtype=np.complex128)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
            raise InvalidStateError(f"Density matrix must be square, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise InvalidStateError("Density matrix has non-finite entries")

        asym = np.max(np.abs(raw - raw.conj().T)) if raw.size else 0.0
        if asym > HERMITIAN_TOL:
            raise InvalidStateError(f"Density matrix is not Hermitian (max asymmetry {asym:.3e})")
        sym = 0.5 * (raw + raw.conj().T)

        trace = np.trace(sym).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"Density matrix trace must be 1, got {trace:.15g}")

        min_eig = np.linalg.eigvalsh(sym).min()
        if min_eig < -PSD_TOL:
            raise InvalidStateError(f"Density matrix is not PSD (min eigenvalue {min_eig:.3e})")

        sym.setflags(write=False)
        object.__setattr__(self, "mat", sym)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)


@dataclass(frozen=True)
class BlochVector:
    """Real 3-vector with norm at most 1 (within 1e-12)."""

    b1: float
    b2: float
    b3: float

    def __post_init__(self) -> None:
        norm_sq = self.b1**2 + self.b2**2 + self.b3**2
        if not np.isfinite(norm_sq) or norm_sq > 1.0 + 1e-12:
            raise InvalidStateError(
                f"Bloch vector must have norm <= 1, got |b| = {np.sqrt(norm_sq):.15g}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "BlochVector":
        b1, b2, b3 = (float(v) for v in values)
        return cls(b1, b2, b3)


@dataclass(frozen=True)
class PauliChannelProbs:
    """
    Probability 4-vector (p0, p1, p2, p3) of the Pauli channel rho -> sum_j p_j s_j rho s_j.

    Raises:
        InvalidWeightsError: If an entry is below -1e-12 or the entries do not sum to 1.
    """

    p0: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self) -> None:
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise InvalidWeightsError(f"Channel probabilities must be finite, got {arr}")
        if arr.min() < -PROB_TOL:
            raise InvalidWeightsError(f"Channel probabilities must be non-negative, got {arr}")
        if abs(arr.sum() - 1.0) > PROB_TOL:
            raise InvalidWeightsError(f"Channel probabilities must sum to 1, got {arr.sum():.15g}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2, self.p3], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PauliChannelProbs":
        p0, p1, p2, p3 = (float(v) for v in values)
        return cls(p0, p1, p2, p3)


@dataclass(frozen=True)
class MixtureWeights:
    """
    Simplex point (x1, x2, x3): weights of the three Cartesian dephasing semigroups.

    Raises:
        InvalidWeightsError: If a weight is negative or the weights do not sum to 1 within
            ``tol`` (1e-12 by default).
    """

    x1: float
    x2: float
    x3: float

    def __post_init__(self) -> None:
        self.validate(PROB_TOL)

    def validate(self, tol: float) -> None:
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise InvalidWeightsError(f"Mixture weights must be finite, got {arr}")
        if arr.min() < 0.0:
            raise InvalidWeightsError(f"Mixture weights must be non-negative, got {arr}")
        if abs(arr.sum() - 1.0) > tol:
            raise InvalidWeightsError(f"Mixture weights must sum to 1, got {arr.sum():.15g}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "MixtureWeights":
        x1, x2, x3 = (float(v) for v in values)
        return cls(x1, x2, x3)

    @classmethod
    def parse(cls, text: str, tol: float = 1e-9) -> "MixtureWeights":
        """
        Parse weights from "a,b" (third inferred) or "a,b,c" (validated).

        Args:
            text: Comma-separated weights
            tol: Tolerance on the simplex constraint for the full triple

        Returns:
            MixtureWeights, renormalized to sum exactly to 1

        Raises:
            InvalidWeightsError: If the text is malformed or off the simplex
        """
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError as e:
            raise InvalidWeightsError(f"Malformed weights '{text}': {e}") from e

        if len(values) == 2:
            values.append(1.0 - values[0] - values[1])
            if abs(values[2]) < tol:
                values[2] = 0.0
        elif len(values) != 3:
            raise InvalidWeightsError(f"Expected 2 or 3 comma-separated weights, got '{text}'")

        arr = np.array(values)
        if arr.min() < 0.0 or abs(arr.sum() - 1.0) > tol:
            raise InvalidWeightsError(f"Weights {values} are not on the simplex (tol {tol})")
        return cls.from_array(arr / arr.sum())

    def format(self) -> str:
        return ",".join(f"{v:.17g}" for v in self.as_array())


def from_bloch(b: BlochVector) -> DensityMatrix:
    """Qubit state (1 + b.sigma)/2."""
    vec = b.as_array()
    mat = 0.5 * (PAULIS[0] + np.einsum("k,kij->ij", vec, PAULIS[1:]))
    return DensityMatrix(mat)


def to_bloch(rho: DensityMatrix) -> BlochVector:
    """Bloch vector b_k = Tr(rho sigma_k) of a qubit state."""
    if rho.dim != 2:
        raise DimensionMismatchError(f"Bloch vector needs a qubit state, got dim {rho.dim}")
    return BlochVector.from_array(bloch_components(rho.mat))


def bloch_components(mat: np.ndarray) -> np.ndarray:
    """Real parts of Tr(X sigma_k) for a 2x2 matrix or a stack of them (..., 2, 2)."""
    return np.einsum("...ij,kji->...k", mat, PAULIS[1:]).real


def trace_norm(x: np.ndarray) -> float:
    """
    Trace norm (sum of absolute eigenvalues) of a Hermitian matrix.

    Raises:
        ContractViolationError: If ``x`` is not Hermitian within 1e-10
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ContractViolationError(f"trace_norm needs a square matrix, got shape {x.shape}")
    if np.max(np.abs(x - x.conj().T)) > 1e-10:
        raise ContractViolationError("trace_norm needs a Hermitian matrix")
    return float(np.abs(np.linalg.eigvalsh(0.5 * (x + x.conj().T))).sum())


def trace_norms(stack: np.ndarray) -> np.ndarray:
    """Trace norms of a stack (..., d, d) of Hermitian matrices, no validation."""
    return np.abs(np.linalg.eigvalsh(stack)).sum(axis=-1)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    return 0.5 * trace_norm(rho.mat - sigma.mat)


def partial_trace(
    rho: DensityMatrix | np.ndarray, dims: Sequence[int], keep: Sequence[int]
) -> DensityMatrix:
    """
    Trace out every tensor factor not listed in ``keep``.

    Args:
        rho: State (or square operator) on the product space
        dims: Dimensions of the tensor factors, in order
        keep: Indices of the factors to keep (order is normalized to ascending)

    Returns:
        Reduced state on the kept factors; a 1x1 state [[1]] when nothing is kept

    Raises:
        DimensionMismatchError: If the factor dimensions do not multiply to dim(rho)
    """
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    return DensityMatrix(reduce_operator(mat, dims, keep))


def reduce_operator(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of an arbitrary square operator; returns a plain array."""
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if mat.shape != (total, total):
        raise DimensionMismatchError(
            f"Factor dimensions {dims} (product {total}) do not match operator shape {mat.shape}"
        )
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatchError(f"Keep indices {keep} out of range for {len(dims)} factors")

    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    spec = f"{''.join(row)}{''.join(col)}->{''.join(out)}"

    reduced = np.einsum(spec, mat.reshape(dims + dims))
    kept = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(kept, kept)


def apply_pauli_channel(p: PauliChannelProbs, rho: DensityMatrix) -> DensityMatrix:
    """Pauli channel sum_j p_j sigma_j rho sigma_j on a qubit state."""
    if rho.dim != 2:
        raise DimensionMismatchError(f"Pauli channel acts on qubits, got dim {rho.dim}")
    return DensityMatrix(pauli_map(p.as_array(), rho.mat))


def pauli_map(weights: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Signed Pauli-diagonal map sum_j w_j sigma_j X sigma_j on a 2x2 operator."""
    return np.einsum("j,jab,bc,jcd->ad", weights, PAULIS, mat, PAULIS)


def hadamard4(v: Sequence[float]) -> np.ndarray:
    """
    Klein-four Hadamard transform H v.

    Maps Pauli channel probabilities (p0..p3) to the Bloch multipliers (1, l1, l2, l3);
    (1/4) H is its inverse.
    """
    return HADAMARD4 @ np.asarray(v, dtype=np.float64)


def pauli_choi_matrix(weights: Sequence[float]) -> np.ndarray:
    """
    Choi matrix sum_ab |a><b| (x) M(|a><b|) of a (possibly signed) Pauli-diagonal map M.

    Its eigenvalues are 2 * weights, so it is PSD iff every weight is non-negative.
    """
    w = np.asarray(weights, dtype=np.float64)
    choi = np.zeros((4, 4), dtype=np.complex128)
    for a in range(2):
        for b in range(2):
            unit = np.zeros((2, 2), dtype=np.complex128)
            unit[a, b] = 1.0
            choi += np.kron(unit, pauli_map(w, unit))
    return choi


def bell_states() -> np.ndarray:
    """
    Bell vectors |Phi_j> = (sigma_j (x) 1)|Phi_0>, |Phi_0> = (|00> + |11>)/sqrt(2).

    Returns:
        Array of shape (4, 4), one normalized vector per row
    """
    phi0 = np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2.0)
    return np.array([np.kron(PAULIS[j], PAULIS[0]) @ phi0 for j in range(4)])


def block_swap_unitary(dim: int, block: int, k: int) -> np.ndarray:
    """
    Permutation unitary swapping basis block 0 with block k.

    Basis vectors i and k*block + i are exchanged for i < block; everything else is fixed. The
    result is a real symmetric involution.
    """
    if (k + 1) * block > dim:
        raise DimensionMismatchError(f"Block {k} of size {block} does not fit in dim {dim}")
    perm = np.arange(dim)
    if k > 0:
        perm[:block], perm[k * block : (k + 1) * block] = (
            np.arange(k * block, (k + 1) * block),
            np.arange(block),
        )
    unitary = np.zeros((dim, dim), dtype=np.complex128)
    unitary[perm, np.arange(dim)] = 1.0
    return unitary


def eigenbasis(rho: DensityMatrix, degeneracy_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues (descending) and eigenvectors (columns) of a state.

    A fully degenerate spectrum returns the computational basis so the choice is reproducible.
    """
    evals, evecs = np.linalg.eigh(rho.mat)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if np.ptp(evals) < degeneracy_tol:
        return np.full(rho.dim, 1.0 / rho.dim), np.eye(rho.dim, dtype=np.complex128)
    return np.clip(evals, 0.0, None), evecs


def random_pure_state(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Haar-random pure state |psi><psi| of dimension ``dim``."""
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def random_density_matrix(
    dim: int, rng: np.random.Generator, rank: int | None = None
) -> DensityMatrix:
    """Random mixed state G G^dagger / Tr(G G^dagger) from a dim x rank Ginibre matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real)
