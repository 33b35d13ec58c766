"""Tests for the Markovianity classifiers and the witness search."""

import numpy as np
import pytest

from src.analytic import probs_from_lambdas
from src.divisibility import (
    BLP_TOL,
    blp_derivative,
    blp_derivatives_batch,
    classify,
    intermediate_map,
    random_state_pairs,
    two_qubit_violation,
    witness_candidates,
)
from src.errors import ContractViolationError, GridError
from src.integrators import TimeGrid
from src.qubit_core import (
    BlochVector,
    MixtureWeights,
    from_bloch,
    random_density_matrix,
    random_pure_state,
)
from src.triangle import onset_time


def _enm_witness_derivative(s, t):
    """d/dt of ||(Lambda_{t,s} (x) id) |Phi0><Phi0|||_1 for the weights (1/2, 1/2, 0)."""
    return np.exp(-2.0 * t) * (np.exp(2.0 * s) - 1.0) / (1.0 + np.exp(-2.0 * s))


def test_classify_enm(enm):
    """(1/2, 1/2, 0) loses CP-divisibility at once but stays P-divisible."""
    report = classify(enm, TimeGrid(0.0, 3.0, 30), n_pairs=200)
    assert report.first_negative_rate[0] == 3
    assert report.first_negative_rate[1] == pytest.approx(0.1)
    assert report.cp_divisible[0]
    assert not report.cp_divisible[1:].any()
    assert report.p_divisible.all()
    assert report.blp_monotone.all()
    assert report.geometric.all()
    assert report.cpt.all()


def test_classify_vertex_is_fully_markovian():
    """A vertex passes every check."""
    report = classify(MixtureWeights(0.0, 0.0, 1.0), TimeGrid(0.0, 2.0, 20), n_pairs=100)
    assert report.first_negative_rate is None
    assert report.cp_divisible.all()
    assert report.blp_monotone.all()


def test_classify_generic_point_turns_negative_after_onset(generic_weights):
    """CP-divisibility ends at the onset time."""
    report = classify(generic_weights, TimeGrid(0.0, 1.0, 100), n_pairs=50)
    k, t = report.first_negative_rate
    assert k == 3
    assert t == pytest.approx(0.30, abs=1e-9)
    assert report.cp_divisible[:30].all()
    assert not report.cp_divisible[30:].any()


def test_report_frame(enm):
    """Report table columns."""
    df = classify(enm, TimeGrid(0.0, 1.0, 4), n_pairs=10).to_frame()
    assert list(df.columns) == ["t", "cpt", "cp_div", "p_div", "blp", "geometric"]
    assert len(df) == 5


def test_intermediate_map_before_and_after_onset(generic_weights):
    """Intermediate maps lose CP but keep P after onset."""
    early = intermediate_map(generic_weights, 0.0, 0.2)
    assert early.cp and early.p
    late = intermediate_map(generic_weights, 0.5, 0.55)
    assert not late.cp
    assert late.p


def test_intermediate_map_multipliers(enm):
    """Intermediate multipliers are lambda ratios."""
    imap = intermediate_map(enm, 1.0, 1.1)
    assert imap.xi3 == pytest.approx(np.exp(-0.2))
    assert not imap.cp
    with pytest.raises(GridError):
        intermediate_map(enm, 1.0, 1.0)


def test_blp_derivative_is_non_positive_for_p_divisible_map(enm, rng):
    """Trace distance never grows under a P-divisible map."""
    for t in (0.0, 0.5, 2.0):
        rho1, rho2 = random_pure_state(2, rng), random_pure_state(2, rng)
        assert blp_derivative(enm, rho1, rho2, t) <= 1e-8


def test_blp_derivative_sweep_over_random_pairs(rng):
    """1000 random pairs at random weights and times never gain distinguishability."""
    for _ in range(1000):
        x = MixtureWeights.from_array(rng.dirichlet(np.ones(3)))
        t = rng.uniform(0.01, 3.0)
        rho1 = random_density_matrix(2, rng, rank=int(rng.integers(1, 3)))
        rho2 = random_density_matrix(2, rng, rank=int(rng.integers(1, 3)))
        assert blp_derivative(x, rho1, rho2, t) <= BLP_TOL


def test_blp_batch_matches_single_pairs(generic_weights, rng):
    """Batched and single-pair derivatives agree."""
    rho1, rho2 = random_pure_state(2, rng), random_pure_state(2, rng)
    deltas = random_state_pairs(20, rng)
    deltas[0] = rho1.mat - rho2.mat
    batch = blp_derivatives_batch(generic_weights, deltas, 0.8)
    assert batch[0] == pytest.approx(blp_derivative(generic_weights, rho1, rho2, 0.8))
    assert batch.max() <= BLP_TOL


@pytest.mark.parametrize(
    "weights",
    [(0.5, 0.5, 0.0), (0.6, 0.3, 0.1), (0.45, 0.45, 0.1), (0.2, 0.2, 0.6), (1 / 3, 1 / 3, 1 / 3)],
    ids=str,
)
def test_interval_maps_track_rate_signs_on_refined_grids(weights):
    """Step propagators are CP where both ends are CP-divisible and fail past the onset."""
    x = MixtureWeights(*weights)
    t_star = onset_time(x)
    for steps in (40, 80, 160):
        grid = TimeGrid(0.0, 2.0, steps)
        times = grid.times
        cp_div = classify(x, grid, n_pairs=2).cp_divisible
        for n in range(steps):
            interval_cp = intermediate_map(x, times[n], times[n + 1]).cp
            if cp_div[n] and cp_div[n + 1]:
                assert interval_cp, f"t={times[n]:.4f}, steps={steps}"
            elif t_star is not None and times[n] > t_star + 5.0 * grid.h:
                assert not interval_cp, f"t={times[n]:.4f}, steps={steps}"


def test_blp_derivative_errors(enm, plus_state):
    """Equal states or negative times are rejected."""
    with pytest.raises(ContractViolationError):
        blp_derivative(enm, plus_state, plus_state, 1.0)
    other = from_bloch(BlochVector(0.0, 0.0, 1.0))
    with pytest.raises(GridError):
        blp_derivative(enm, plus_state, other, -1.0)


def test_witness_candidates(rng):
    """Candidate families and their labels line up."""
    ops, families = witness_candidates(5, rng)
    assert len(ops) == len(families)
    assert families[0] == "bell-projector-0"
    assert sum(f.startswith("random-hermitian") for f in families) == 5
    np.testing.assert_allclose(ops, np.conj(np.swapaxes(ops, -1, -2)), atol=1e-15)


def test_enm_violation_matches_bell_projector_value(enm):
    """The Bell projector reaches its closed-form growth rate."""
    result = two_qubit_violation(enm, np.array([1.0]), np.array([1.1]), n_random=0, refine=False)
    assert result.witness is not None
    assert result.max_derivative >= _enm_witness_derivative(1.0, 1.1) - 1e-6
    assert result.witness.s == 1.0
    assert result.witness.t == 1.1


def test_witness_derivative_matches_intermediate_map(enm):
    """Trace norm of the Choi state is sum_j |q_j|; its slope agrees with the closed form."""
    s, t, h = 1.0, 1.1, 1e-5

    def choi_norm(tau):
        xi = intermediate_map(enm, s, tau).xi
        return np.abs(probs_from_lambdas(xi)).sum()

    slope = (choi_norm(t + h) - choi_norm(t - h)) / (2 * h)
    assert slope == pytest.approx(_enm_witness_derivative(s, t), rel=1e-6)


def test_refined_search_reports_traceless_flag(enm):
    """A grid of pairs yields a witness and counts every candidate."""
    result = two_qubit_violation(
        enm, np.array([0.5, 1.0]), np.array([1.2, 1.5]), n_random=10, seed=3
    )
    assert result.witness is not None
    assert result.max_derivative > 0.1
    assert isinstance(result.witness.traceless, bool)
    assert result.candidates_checked == (4 + 6 + 24 + 10) * 4


def test_vertex_has_no_violation():
    """A semigroup admits no witness."""
    result = two_qubit_violation(
        MixtureWeights(1.0, 0.0, 0.0),
        np.linspace(0.0, 1.0, 3),
        np.linspace(0.5, 2.0, 3),
        n_random=20,
        refine=False,
    )
    assert result.witness is None
    assert result.max_derivative <= 1e-7


def test_violation_needs_ordered_pairs(enm):
    """Every grid pair needs s < t."""
    with pytest.raises(GridError):
        two_qubit_violation(enm, np.array([1.0]), np.array([0.5]), n_random=0)
