"""Tests for the Monte Carlo realisations."""

import numpy as np
import pytest

from src.analytic import channel_probs, lambda_values
from src.errors import ValidationError
from src.integrators import TimeGrid, classical_markov_generator
from src.qubit_core import (
    PAULIS,
    DensityMatrix,
    MixtureWeights,
    bloch_components,
    random_density_matrix,
    random_pure_state,
)
from src.rng import make_rng
from src.stochastic import (
    DirectionSpec,
    anisotropic_moments,
    calibrate_anisotropic_variances,
    empirical_generator,
    extended_jump_states,
    gillespie,
    jump_ensemble,
    jump_unitaries,
    occupation_times,
    ru_evolve,
    sample_directions,
    sample_occupations,
    simulate_extended_jumps,
)


def _within_sigma(estimate, exact, stderr, n_sigma=4.0, floor=1e-12):
    return np.all(np.abs(estimate - exact) <= n_sigma * stderr + floor)


def test_direction_spec_validation(generic_weights):
    """Unknown direction laws are rejected."""
    with pytest.raises(ValidationError):
        DirectionSpec("spiral", generic_weights)
    with pytest.raises(ValidationError):
        DirectionSpec("discrete-axes")
    iso = DirectionSpec("uniform-sphere", generic_weights)
    np.testing.assert_allclose(iso.weights.as_array(), np.full(3, 1 / 3))


@pytest.mark.parametrize("kind", ["discrete-axes", "gaussian-anisotropic"])
def test_direction_second_moments(kind, generic_weights, rng):
    """Direction second moments match the weights."""
    directions = sample_directions(DirectionSpec(kind, generic_weights), 200_000, rng)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, atol=1e-12)
    second = np.einsum("ni,nj->ij", directions, directions) / len(directions)
    np.testing.assert_allclose(np.diag(second), generic_weights.as_array(), atol=5e-3)
    assert np.max(np.abs(second - np.diag(np.diag(second)))) < 5e-3


def test_calibrated_variances_reproduce_weights(generic_weights):
    """Calibrated Gaussian variances reproduce the weights."""
    variances = calibrate_anisotropic_variances(generic_weights)
    assert variances.sum() == pytest.approx(1.0)
    moments = anisotropic_moments(variances)
    np.testing.assert_allclose(moments, generic_weights.as_array(), atol=1e-8)


def test_calibration_edge_cases(enm):
    """Isotropic and vertex weights calibrate cleanly."""
    iso = MixtureWeights(1 / 3, 1 / 3, 1 / 3)
    np.testing.assert_allclose(calibrate_anisotropic_variances(iso), iso.as_array())
    np.testing.assert_allclose(calibrate_anisotropic_variances(enm), [0.5, 0.5, 0.0])
    vertex = MixtureWeights(0.0, 1.0, 0.0)
    np.testing.assert_allclose(calibrate_anisotropic_variances(vertex), [0.0, 1.0, 0.0])


def test_isotropic_moments_are_one_third():
    """Isotropic directions have moments of one third."""
    third = np.full(3, 1 / 3)
    np.testing.assert_allclose(anisotropic_moments(third), third, atol=1e-10)


@pytest.mark.parametrize("kind", ["discrete-axes", "gaussian-anisotropic"])
def test_exact_phase_random_unitaries(kind, generic_weights, tilted_state, rng):
    """Exact-phase ensemble matches the closed form."""
    t = 0.7
    spec = DirectionSpec(kind, generic_weights)
    estimate, stderr = ru_evolve(tilted_state, t, spec, 40_000, rng)
    exact = lambda_values(generic_weights.as_array(), t) * bloch_components(tilted_state.mat)
    assert _within_sigma(bloch_components(estimate.mat), exact, stderr)


def test_pathwise_random_unitaries(generic_weights, tilted_state, rng):
    """Pathwise ensemble matches the closed form."""
    t = 0.5
    spec = DirectionSpec("discrete-axes", generic_weights)
    estimate, stderr = ru_evolve(tilted_state, t, spec, 20_000, rng, mode="pathwise", h=1e-3)
    exact = lambda_values(generic_weights.as_array(), t) * bloch_components(tilted_state.mat)
    assert _within_sigma(bloch_components(estimate.mat), exact, stderr)


def test_uniform_sphere_matches_symmetric_mixture(tilted_state, rng):
    """Uniform directions realise the symmetric mixture."""
    t = 0.4
    estimate, stderr = ru_evolve(tilted_state, t, DirectionSpec("uniform-sphere"), 40_000, rng)
    exact = lambda_values(np.full(3, 1 / 3), t) * bloch_components(tilted_state.mat)
    assert _within_sigma(bloch_components(estimate.mat), exact, stderr)


def test_ru_evolve_at_zero_time_is_identity(generic_weights, tilted_state, rng):
    """Nothing moves at t = 0."""
    estimate, _ = ru_evolve(
        tilted_state, 0.0, DirectionSpec("discrete-axes", generic_weights), 100, rng
    )
    np.testing.assert_allclose(estimate.mat, tilted_state.mat, atol=1e-12)


def test_ru_evolve_errors(generic_weights, tilted_state, rng):
    """Bad sample counts or times are rejected."""
    spec = DirectionSpec("discrete-axes", generic_weights)
    with pytest.raises(ValidationError):
        ru_evolve(tilted_state, 1.0, spec, 0, rng)
    with pytest.raises(ValidationError):
        ru_evolve(tilted_state, -1.0, spec, 10, rng)
    with pytest.raises(ValidationError):
        ru_evolve(tilted_state, 1.0, spec, 10, rng, mode="euler")
    with pytest.raises(ValidationError):
        ru_evolve(DensityMatrix(np.eye(4) / 4), 1.0, spec, 10, rng)


def test_gillespie_trajectory_structure(generic_weights, rng):
    """Jumps alternate between 0 and a Pauli label."""
    events = gillespie(generic_weights, 50.0, rng)
    assert all(a.time < b.time for a, b in zip(events, events[1:], strict=False))
    for event in events:
        assert (event.from_state == 0) != (event.to_state == 0)
    spent = occupation_times(events, 50.0)
    assert spent.sum() == pytest.approx(50.0)

    with pytest.raises(ValidationError):
        gillespie(generic_weights, 0.0, rng)


def test_empirical_generator_recovers_rates(generic_weights, rng):
    """Long trajectories recover the classical rates."""
    events = gillespie(generic_weights, 20_000.0, rng)
    estimate, errors = empirical_generator(events, 20_000.0)
    exact = classical_markov_generator(generic_weights)
    off = ~np.eye(4, dtype=bool)
    assert np.all(np.abs(estimate - exact)[off] <= 5.0 * errors[off] + 1e-12)
    np.testing.assert_allclose(estimate.sum(axis=0), 0.0, atol=1e-12)


def test_sample_occupations_match_channel_probs(generic_weights, rng):
    """Label occupations match the Pauli probabilities."""
    times = np.linspace(0.0, 2.0, 5)
    probs, stderr = sample_occupations(generic_weights, times, 20_000, rng)
    exact = np.array([channel_probs(generic_weights, t).as_array() for t in times])
    assert _within_sigma(probs, exact, stderr)
    np.testing.assert_allclose(probs[0], [1.0, 0.0, 0.0, 0.0])


def test_jump_ensemble_matches_analytic(generic_weights, tilted_state, rng):
    """Jump ensemble matches the closed form."""
    grid = TimeGrid(0.0, 2.0, 8)
    record = jump_ensemble(generic_weights, tilted_state, grid, 20_000, rng)
    exact = lambda_values(generic_weights.as_array(), grid.times) * bloch_components(
        tilted_state.mat
    )
    assert _within_sigma(record.bloch(), exact, record.stderr)
    assert record.samples == 20_000
    with pytest.raises(ValidationError):
        jump_ensemble(generic_weights, tilted_state, grid, 0, rng)


def test_jump_unitaries_are_unitary():
    """Jump operators are unitary."""
    for op in jump_unitaries():
        np.testing.assert_allclose(op.conj().T @ op, np.eye(16), atol=1e-15)


def test_extended_jump_states_for_random_states(rng):
    """Extended jump states for 100 random inputs."""
    for i in range(100):
        rho0 = random_density_matrix(2, rng) if i % 2 else random_pure_state(2, rng)
        vectors, report = extended_jump_states(rho0)
        assert vectors.shape == (4, 16)
        assert report.ok


def test_extended_jump_states_for_maximally_mixed_state():
    """Extended jump states for the maximally mixed state."""
    vectors, report = extended_jump_states(DensityMatrix(np.eye(2) / 2))
    assert report.ok
    np.testing.assert_allclose(vectors.conj() @ vectors.T, np.eye(4), atol=1e-14)


def test_extended_jump_states_reduce_to_pauli_images(tilted_state):
    """Reduced extended states are Pauli images."""
    vectors, _ = extended_jump_states(tilted_state)
    for k, v in enumerate(vectors):
        blocks = v.reshape(2, 8)
        reduced = blocks @ blocks.conj().T
        expected = PAULIS[k] @ tilted_state.mat @ PAULIS[k]
        np.testing.assert_allclose(reduced, expected, atol=1e-12)


def test_extended_jumps_follow_the_same_runs_as_label_jumps(generic_weights, tilted_state):
    """Same stream, same jump times: carrying vectors or labels gives one ensemble average."""
    grid = TimeGrid(0.0, 1.5, 6)
    labels = jump_ensemble(generic_weights, tilted_state, grid, 5_000, make_rng(7))
    extended = simulate_extended_jumps(generic_weights, tilted_state, grid, 5_000, make_rng(7))
    np.testing.assert_allclose(extended.states, labels.states, atol=1e-10)
    assert extended.method == "jump-extended"
