"""Tests for the qubit-register embeddings and the six-qubit jump states."""

import logging

import numpy as np
import pytest

from src.analytic import channel_probs, mixture_map
from src.embeddings import (
    QuantumClassicalState,
    build_bipartite_generator,
    evolve_embedded,
    quantum_classical_state,
    register_projector,
    six_qubit_jump_states,
    two_qubit_map,
)
from src.errors import DimensionMismatchError, ValidationError
from src.qubit_core import (
    PAULIS,
    DensityMatrix,
    MixtureWeights,
    bell_states,
    random_density_matrix,
    random_pure_state,
    reduce_operator,
    trace_distance,
)


def test_register_projector():
    """Register projectors resolve the identity."""
    np.testing.assert_allclose(sum(register_projector(i) for i in (1, 2, 3)), np.eye(3))
    with pytest.raises(ValidationError):
        register_projector(0)


def test_generator_dephases_each_register_block(generic_weights, tilted_state):
    """Block k of the generator dephases along axis k."""
    generator = build_bipartite_generator(generic_weights)
    for i in (1, 2, 3):
        block = np.kron(tilted_state.mat, register_projector(i))
        expected = np.kron(
            PAULIS[i] @ tilted_state.mat @ PAULIS[i] - tilted_state.mat, register_projector(i)
        )
        np.testing.assert_allclose(generator.apply(block), expected, atol=1e-14)


def test_generator_is_unital_and_trace_preserving(generic_weights, rng):
    """The generator is unital and trace preserving."""
    generator = build_bipartite_generator(generic_weights)
    np.testing.assert_allclose(generator.apply(np.eye(6)), 0.0, atol=1e-14)
    op = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert abs(np.trace(generator.apply(op))) < 1e-12


def test_jump_operators_resolve_identity(generic_weights):
    """Jump operators square-sum to the identity."""
    ops = build_bipartite_generator(generic_weights).jump_operators
    total = sum(op.conj().T @ op for op in ops)
    np.testing.assert_allclose(total, np.eye(6), atol=1e-15)


def test_generator_dimensions(generic_weights):
    """Qubit times 3-level register."""
    assert build_bipartite_generator(generic_weights).dim == 6
    assert build_bipartite_generator(generic_weights, system_dim=4).dim == 12
    with pytest.raises(DimensionMismatchError):
        build_bipartite_generator(generic_weights, system_dim=3)


def test_embedded_evolution_reproduces_mixture(generic_weights, tilted_state):
    """Tracing out the register gives the mixture map."""
    for t in (0.0, 0.3, 2.0):
        rho_s, rho_e, report = evolve_embedded(tilted_state, generic_weights, t)
        assert report.ok
        assert report.frozen and report.separable
        assert trace_distance(rho_s, mixture_map(generic_weights, tilted_state, t)) < 1e-10
        np.testing.assert_allclose(rho_e.mat, np.diag(generic_weights.as_array()), atol=1e-10)


def test_embedded_evolution_for_random_inputs(rng, simplex_points, caplog):
    """Random states and weights pass the structure checks."""
    with caplog.at_level(logging.WARNING):
        for p in simplex_points[:100]:
            x = MixtureWeights.from_array(p / p.sum())
            rho0 = random_density_matrix(2, rng)
            t = float(rng.uniform(0.0, 3.0))
            _, _, report = evolve_embedded(rho0, x, t)
            assert report.ok
    assert "failed structure checks" not in caplog.text


def test_embedded_evolution_rejects_two_qubits(generic_weights):
    """Only qubit inputs are embedded."""
    with pytest.raises(DimensionMismatchError):
        evolve_embedded(DensityMatrix(np.eye(4) / 4), generic_weights, 1.0)


def test_quantum_classical_state_blocks(enm, plus_state):
    """Blocks survive a round trip through the full matrix."""
    qc = quantum_classical_state(plus_state, enm)
    assert len(qc.blocks) == 2
    np.testing.assert_allclose(qc.weights, [0.5, 0.5, 0.0])
    back = QuantumClassicalState.from_matrix(qc.to_matrix(), 2)
    np.testing.assert_allclose(back.weights, qc.weights, atol=1e-15)
    for rho, _, _ in back.blocks:
        np.testing.assert_allclose(rho.mat, plus_state.mat, atol=1e-15)


def test_quantum_classical_state_validation(plus_state):
    """Mismatched inputs raise ValidationError."""
    with pytest.raises(ValidationError):
        QuantumClassicalState(((plus_state, 0.5, 1), (plus_state, 0.5, 1)))
    with pytest.raises(ValidationError):
        QuantumClassicalState(((plus_state, 0.5, 1), (plus_state, 0.2, 2)))
    with pytest.raises(DimensionMismatchError):
        QuantumClassicalState(((plus_state, 0.5, 1), (DensityMatrix(np.eye(4) / 4), 0.5, 2)))


def test_two_qubit_map_on_product_state(generic_weights, rng):
    """Product states map to products of images."""
    rho_a = random_density_matrix(2, rng)
    rho_b = random_pure_state(2, rng)
    out = two_qubit_map(DensityMatrix(np.kron(rho_a.mat, rho_b.mat)), generic_weights, 0.8)
    expected = np.kron(mixture_map(generic_weights, rho_a, 0.8).mat, rho_b.mat)
    np.testing.assert_allclose(out.mat, expected, atol=1e-10)


def test_two_qubit_map_on_bell_state(enm):
    """A Bell state maps to the Bell-diagonal mixture with the channel probabilities."""
    phi = bell_states()
    rho = DensityMatrix(np.outer(phi[0], phi[0].conj()))
    out = two_qubit_map(rho, enm, 1.1)
    probs = channel_probs(enm, 1.1).as_array()
    expected = sum(p * np.outer(v, v.conj()) for p, v in zip(probs, phi, strict=True))
    np.testing.assert_allclose(out.mat, expected, atol=1e-10)


def test_two_qubit_map_at_zero_time(generic_weights, rng):
    """At t = 0 the map is the identity."""
    rho = random_density_matrix(4, rng)
    np.testing.assert_allclose(two_qubit_map(rho, generic_weights, 0.0).mat, rho.mat, atol=1e-12)
    with pytest.raises(DimensionMismatchError):
        two_qubit_map(random_density_matrix(2, rng), generic_weights, 1.0)


def _check_six_qubit_states(rho_ab):
    vectors, report = six_qubit_jump_states(rho_ab)
    assert vectors.shape == (4, 64)
    assert report.ok
    joint = reduce_operator(np.outer(vectors[0], vectors[0].conj()), [4, 16], [0])
    np.testing.assert_allclose(joint, rho_ab.mat, atol=1e-10)
    rho_a = reduce_operator(rho_ab.mat, [2, 2], [0])
    for j, v in enumerate(vectors):
        reduced = reduce_operator(np.outer(v, v.conj()), [2, 2, 16], [0])
        np.testing.assert_allclose(reduced, PAULIS[j] @ rho_a @ PAULIS[j], atol=1e-10)


def test_six_qubit_states_for_product_state(tilted_state, plus_state):
    """Six-qubit construction for a product input."""
    _check_six_qubit_states(DensityMatrix(np.kron(tilted_state.mat, plus_state.mat)))


def test_six_qubit_states_for_bell_state():
    """Six-qubit construction for a Bell input."""
    phi = bell_states()[0]
    _check_six_qubit_states(DensityMatrix(np.outer(phi, phi.conj())))


def test_six_qubit_states_for_random_states(rng):
    """Six-qubit construction for 100 random inputs."""
    for i in range(100):
        rho = random_density_matrix(4, rng) if i % 2 else random_pure_state(4, rng)
        _check_six_qubit_states(rho)


def test_six_qubit_states_reject_qubit(plus_state):
    """A single qubit is not a two-qubit input."""
    with pytest.raises(DimensionMismatchError):
        six_qubit_jump_states(plus_state)
