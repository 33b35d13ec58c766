"""Tests for the closed-form mixture dynamics."""

import numpy as np
import pytest

from src.analytic import (
    LambdaTriple,
    channel_probs,
    cpt_holds,
    dephasing_solution,
    enm_rates,
    evolve_state,
    integrated_rates,
    kernel_components,
    lambda_values,
    lambdas,
    mixture_map,
    mu_values,
    probs_from_lambdas,
    rate_arrays,
    rate_function,
    rates,
    scaled_rate_arrays,
)
from src.errors import ContractViolationError, GridError, ValidationError
from src.integrators import integrate_rates
from src.qubit_core import (
    MixtureWeights,
    hadamard4,
    pauli_choi_matrix,
    random_density_matrix,
    trace_distance,
)


def test_lambdas_at_zero_and_infinity(generic_weights):
    """Multipliers start at one and relax to the weights."""
    assert lambdas(generic_weights, 0.0).as_array() == pytest.approx([1.0, 1.0, 1.0])
    assert lambdas(generic_weights, 50.0).as_array() == pytest.approx([0.6, 0.3, 0.1])


def test_channel_probs_match_hadamard_of_lambdas(generic_weights):
    """Pauli probabilities and Bloch multipliers are Hadamard pairs."""
    for t in (0.0, 0.3, 1.7):
        p = channel_probs(generic_weights, t).as_array()
        lam = lambdas(generic_weights, t).as_array()
        np.testing.assert_allclose(hadamard4(p), np.concatenate([[1.0], lam]), atol=1e-14)
        np.testing.assert_allclose(probs_from_lambdas(lam), p, atol=1e-14)


def test_negative_time_rejected(generic_weights):
    """Negative or NaN times raise GridError."""
    with pytest.raises(GridError):
        lambdas(generic_weights, -0.1)
    with pytest.raises(GridError):
        rates(generic_weights, float("nan"))


def test_mu_is_half_log_derivative_of_lambda(rng):
    """Central differences of ln lambda_k reproduce 2 mu_k at random weights and times."""
    points = rng.dirichlet(np.ones(3), size=500)
    times = rng.uniform(0.05, 3.0, size=500)
    step = 1e-5
    forward = np.log(lambda_values(points, times + step))
    backward = np.log(lambda_values(points, times - step))
    numeric = 0.25 * (forward - backward) / step
    np.testing.assert_allclose(mu_values(points, times), numeric, atol=1e-7)


def test_bloch_components_decay_at_pair_rates(rng):
    """d ln lambda_i/dt = -(gamma_j + gamma_k) for every cyclic triple."""
    points = rng.dirichlet(np.ones(3), size=200)
    times = rng.uniform(0.05, 3.0, size=200)
    step = 1e-5
    log_rate = 0.5 * (
        np.log(lambda_values(points, times + step)) - np.log(lambda_values(points, times - step))
    ) / step
    gammas, _ = rate_arrays(points, times)
    pair_sums = gammas.sum(axis=1, keepdims=True) - gammas
    np.testing.assert_allclose(log_rate, -pair_sums, atol=2e-7)


def test_rate_arrays_reject_negative_times(generic_weights):
    """Vectorised rates reject any negative or infinite time."""
    with pytest.raises(GridError):
        rate_arrays(generic_weights.as_array(), np.array([0.0, -0.5]))
    with pytest.raises(GridError):
        rate_arrays(generic_weights.as_array(), float("inf"))


def test_enm_rates_are_one_one_minus_tanh(enm):
    """Mixture (1/2, 1/2, 0) reproduces the eternally non-Markovian rates."""
    for t in np.linspace(0.0, 10.0, 201):
        got = rates(enm, t).gammas
        np.testing.assert_allclose(got, [1.0, 1.0, -np.tanh(t)], atol=1e-10)
        np.testing.assert_allclose(enm_rates(t).gammas, got, atol=1e-10)


def test_enm_total_rate(enm):
    """Total rate of (1/2, 1/2, 0) is 2 - tanh t."""
    diag = rates(enm, 1.3)
    assert diag.gamma0 == pytest.approx(2.0 - np.tanh(1.3))


def test_initial_rates_are_twice_the_weights(simplex_points):
    """At t = 0 every rate equals twice its weight."""
    gammas, _ = rate_arrays(simplex_points, 0.0)
    np.testing.assert_allclose(gammas, 2.0 * simplex_points, atol=1e-12)


def test_symmetric_point_rates():
    """The symmetric mixture has three equal positive rates."""
    x = MixtureWeights(1 / 3, 1 / 3, 1 / 3)
    for t in (0.0, 0.5, 2.0, 8.0):
        np.testing.assert_allclose(
            rates(x, t).gammas, np.full(3, 2.0 / (2.0 + np.exp(2.0 * t))), atol=1e-12
        )


def test_vertex_is_markovian():
    """A vertex is a semigroup with constant rates."""
    x = MixtureWeights(1.0, 0.0, 0.0)
    for t in (0.0, 1.0, 30.0):
        np.testing.assert_allclose(rates(x, t).gammas, [2.0, 0.0, 0.0], atol=1e-12)


def test_rate_arrays_shapes(generic_weights):
    """Rates broadcast over a time axis."""
    times = np.linspace(0.0, 2.0, 7)
    gammas, mus = rate_arrays(generic_weights.as_array(), times)
    assert gammas.shape == (7, 3)
    assert mus.shape == (7, 3)


def test_rates_stay_finite_at_large_times(simplex_points):
    """No overflow or NaN far out in time."""
    gammas, mus = rate_arrays(simplex_points, 400.0)
    assert np.all(np.isfinite(gammas))
    assert np.all(np.isfinite(mus))


def test_scaled_rates_converge_to_asymptotic_limit():
    """Scaled rates tend to the asymptotic margins."""
    x = np.array([0.6, 0.3, 0.1])
    # -1/x_i + 1/x_j + 1/x_k - 1
    limit = (1.0 / x).sum() - 2.0 / x - 1.0
    np.testing.assert_allclose(scaled_rate_arrays(x, 20.0), limit, rtol=1e-6)


def test_scaled_rates_agree_with_plain_rates(generic_weights):
    """Scaled rates are the plain rates times e^{2t}."""
    x = generic_weights.as_array()
    t = 0.8
    gammas, _ = rate_arrays(x, t)
    np.testing.assert_allclose(scaled_rate_arrays(x, t), gammas * np.exp(2.0 * t), rtol=1e-12)


def test_integrated_rates_match_quadrature(generic_weights):
    """Closed-form integrals match numerical quadrature."""
    for t in (0.2, 1.0, 3.0):
        np.testing.assert_allclose(
            integrated_rates(generic_weights, t),
            integrate_rates(rate_function(generic_weights), t),
            atol=1e-8,
        )


def test_evolve_state_equals_mixture_map(rng, random_weights):
    """Weighted dephasing solutions give the mixture map."""
    for x in random_weights:
        rho0 = random_density_matrix(2, rng)
        for t in (0.0, 0.4, 2.5):
            assert trace_distance(evolve_state(x, rho0, t), mixture_map(x, rho0, t)) < 1e-12


def test_dephasing_solution_rejects_bad_axis(plus_state):
    """Only the three Pauli axes are accepted."""
    with pytest.raises(ContractViolationError):
        dephasing_solution(plus_state, np.array([1.0, 1.0, 0.0]), 1.0)


def test_dephasing_solution_fixes_axis_state(plus_state):
    """A state along the dephasing axis does not move."""
    out = dephasing_solution(plus_state, np.array([1.0, 0.0, 0.0]), 3.0)
    assert trace_distance(out, plus_state) < 1e-14


def test_rederived_kernel_components(generic_weights):
    """Default kernel constants for a generic point."""
    kernel = kernel_components(generic_weights)
    xs = generic_weights.as_array()
    np.testing.assert_allclose(kernel.loc_weights, 2.0 * xs)
    np.testing.assert_allclose(kernel.amplitudes, 4.0 * xs * (1.0 - xs))
    np.testing.assert_allclose(kernel.decays, 2.0 * xs)
    np.testing.assert_allclose(kernel.local_rates(), 2.0 * (1.0 - xs))


def test_printed_kernel_components(generic_weights):
    """Printed kernel constants are half the default ones."""
    kernel = kernel_components(generic_weights, "paper")
    xs = generic_weights.as_array()
    np.testing.assert_allclose(kernel.loc_weights, xs)
    np.testing.assert_allclose(kernel.X(0.0), xs * (1.0 - xs))


def test_kernel_eta_combines_memory_functions(generic_weights):
    """eta_i is the cyclic combination of the X_k."""
    kernel = kernel_components(generic_weights)
    t = np.array([0.0, 0.5])
    xs, eta = kernel.X(t), kernel.eta(t)
    assert eta.shape == (3, 2)
    np.testing.assert_allclose(eta[0], 0.5 * (xs[0] - xs[1] - xs[2]))


def test_unknown_kernel_convention(generic_weights):
    """Unknown conventions raise ValidationError."""
    with pytest.raises(ValidationError):
        kernel_components(generic_weights, "other")


def test_cp_conditions_hold_along_mixture(random_weights):
    """The mixture is CPT at every time."""
    for x in random_weights:
        for t in (0.0, 0.7, 5.0):
            assert cpt_holds(lambdas(x, t))


def test_lambda_values_vectorised(simplex_points):
    """Multipliers of many points lie in (0, 1]."""
    lam = lambda_values(simplex_points, 0.5)
    assert lam.shape == simplex_points.shape
    assert np.all((lam > 0.0) & (lam <= 1.0))


def test_cpt_holds_matches_choi_positivity(rng):
    """For 1000 random multipliers in the cube, the CP conditions agree with a PSD Choi matrix."""
    n_cp = 0
    for lam in rng.uniform(-1.0, 1.0, size=(1000, 3)):
        choi = pauli_choi_matrix(probs_from_lambdas(lam))
        psd = np.linalg.eigvalsh(choi).min() >= -1e-12
        assert cpt_holds(LambdaTriple(0.0, *lam)) == psd, lam
        n_cp += int(psd)
    assert 0 < n_cp < 1000


def test_cpt_holds_rejects_negative_identity_weight():
    """All-minus-one multipliers give a negative identity weight."""
    assert not cpt_holds(LambdaTriple(0.0, -1.0, -1.0, -1.0))
    assert cpt_holds(LambdaTriple(0.0, 1.0, -1.0, -1.0))
