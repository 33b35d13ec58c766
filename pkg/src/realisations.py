"""
Run any realisation of the mixture dynamics on a time grid and compare realisations.

Every method returns a TrajectoryRecord of qubit states on the same grid, so any two can be
compared by trace distance.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .analytic import (
    KernelConvention,
    kernel_components,
    lambda_values,
    probs_from_lambdas,
    rate_function,
)
from .embeddings import evolve_embedded
from .errors import DimensionMismatchError, GridError, ValidationError
from .integrators import (
    TimeGrid,
    TrajectoryRecord,
    classical_propagator,
    solve_time_local,
    solve_volterra,
    states_from_lambdas,
)
from .qubit_core import PAULIS, DensityMatrix, MixtureWeights, trace_norms
from .rng import DEFAULT_CHUNK_SIZE, make_rng, stream_generators
from .stochastic import (
    DirectionKind,
    DirectionSpec,
    RUMode,
    jump_ensemble,
    ru_evolve,
    simulate_extended_jumps,
)

logger = logging.getLogger(__name__)

DETERMINISTIC_METHODS: tuple[str, ...] = ("analytic", "ode", "volterra", "classical", "embed")
STOCHASTIC_METHODS: tuple[str, ...] = ("ru", "jump", "jump-extended")
METHODS: tuple[str, ...] = DETERMINISTIC_METHODS + STOCHASTIC_METHODS

DETERMINISTIC_TOL = 1e-6
SIGMA_MULTIPLE = 3.0


@dataclass(frozen=True)
class RealisationOptions:
    """Method-specific knobs; deterministic methods ignore the sampling fields."""

    kernel: KernelConvention = "rederived"
    direction: DirectionKind = "discrete-axes"
    ru_mode: RUMode = "exact-phase"
    samples: int = 100_000
    seed: int | None = 0
    chunk_size: int = DEFAULT_CHUNK_SIZE


def _pauli_mixture_states(rho0: DensityMatrix, probs: np.ndarray) -> np.ndarray:
    """sum_j P_j sigma_j rho0 sigma_j for each row of probs, shape (n, 2, 2)."""
    return np.einsum("nj,jab,bc,jcd->nad", probs, PAULIS, rho0.mat, PAULIS)


def _analytic(x: MixtureWeights, rho0: DensityMatrix, grid: TimeGrid) -> TrajectoryRecord:
    lam = lambda_values(x.as_array(), grid.times)
    return TrajectoryRecord(
        method="analytic",
        times=grid.times,
        states=states_from_lambdas(rho0, lam),
        probs=probs_from_lambdas(lam),
    )


def _classical(x: MixtureWeights, rho0: DensityMatrix, grid: TimeGrid) -> TrajectoryRecord:
    rate_fn = rate_function(x)
    start = np.array([1.0, 0.0, 0.0, 0.0])
    probs = np.array([classical_propagator(rate_fn, t) @ start for t in grid.times])
    return TrajectoryRecord(
        method="classical",
        times=grid.times,
        states=_pauli_mixture_states(rho0, probs),
        probs=probs,
    )


def _embedded(x: MixtureWeights, rho0: DensityMatrix, grid: TimeGrid) -> TrajectoryRecord:
    states = np.array([evolve_embedded(rho0, x, t)[0].mat for t in grid.times])
    return TrajectoryRecord(method="embed", times=grid.times, states=states)


def _random_unitary(
    x: MixtureWeights, rho0: DensityMatrix, grid: TimeGrid, options: RealisationOptions
) -> TrajectoryRecord:
    spec = DirectionSpec(options.direction, x)
    if spec.weights != x:
        logger.warning(
            f"{spec.kind} directions realise x={spec.weights.format()}, not {x.format()}"
        )
    streams = stream_generators(options.seed, len(grid.times))
    states, stderr = [], []
    for t, gen in zip(grid.times, streams, strict=True):
        state, err = ru_evolve(
            rho0,
            float(t),
            spec,
            options.samples,
            gen,
            mode=options.ru_mode,
            chunk_size=options.chunk_size,
        )
        states.append(state.mat)
        stderr.append(err)
    return TrajectoryRecord(
        method="ru",
        times=grid.times,
        states=np.array(states),
        stderr=np.array(stderr),
        seed=options.seed,
        samples=options.samples,
        meta={"direction": spec.kind, "mode": options.ru_mode},
    )


def realise(
    method: str,
    x: MixtureWeights,
    rho0: DensityMatrix,
    grid: TimeGrid,
    options: RealisationOptions | None = None,
) -> TrajectoryRecord:
    """
    Evolve a qubit state with one realisation of the mixture dynamics.

    Args:
        method: One of ``METHODS``
        x: Mixture weights
        rho0: Initial qubit state
        grid: Time grid starting at t0 = 0
        options: Kernel convention, direction distribution and sampling settings

    Returns:
        TrajectoryRecord with one state per grid time

    Raises:
        ValidationError: If the method is unknown, the state is not a qubit or the grid does not
            start at 0
    """
    options = options or RealisationOptions()
    if method not in METHODS:
        raise ValidationError(f"Invalid method: {method}. Must be one of {METHODS}")
    if rho0.dim != 2:
        raise DimensionMismatchError(f"Realisations evolve a qubit, got dim {rho0.dim}")
    if grid.t0 != 0.0:
        raise GridError(f"Realisations start at t=0, got t0={grid.t0}")

    logger.info(f"Running {method} for x={x.format()} on {grid.steps} steps to t={grid.t1}")
    if method == "analytic":
        return _analytic(x, rho0, grid)
    if method == "ode":
        return solve_time_local(rate_function(x), rho0, grid)
    if method == "volterra":
        return solve_volterra(kernel_components(x, options.kernel), rho0, grid)
    if method == "classical":
        return _classical(x, rho0, grid)
    if method == "embed":
        return _embedded(x, rho0, grid)
    if method == "ru":
        return _random_unitary(x, rho0, grid, options)

    rng = make_rng(options.seed)
    if method == "jump":
        record = jump_ensemble(x, rho0, grid, options.samples, rng, options.chunk_size)
    else:
        record = simulate_extended_jumps(x, rho0, grid, options.samples, rng, options.chunk_size)
    return replace(record, seed=options.seed)


@dataclass(frozen=True)
class ComparisonReport:
    """Per-time trace distance between two realisations and the tolerance it is held to."""

    method_a: str
    method_b: str
    times: np.ndarray
    distances: np.ndarray
    tolerances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(self.distances.max())

    @property
    def within(self) -> np.ndarray:
        return self.distances <= self.tolerances

    @property
    def passed(self) -> bool:
        return bool(np.all(self.within))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "distance": self.distances,
                "tolerance": self.tolerances,
                "pass": self.within,
            }
        )

    def to_dict(self) -> dict:
        return {
            "method_a": self.method_a,
            "method_b": self.method_b,
            "max_distance": self.max_distance,
            "passed": self.passed,
            "rows": self.to_frame().to_dict(orient="records"),
        }


def monte_carlo_sigma(stderr: np.ndarray) -> np.ndarray:
    """Trace-distance standard error 1/2 sqrt(sum_k se_k^2) from Bloch-component errors."""
    return 0.5 * np.sqrt(np.sum(np.square(stderr), axis=-1))


def compare(
    a: TrajectoryRecord, b: TrajectoryRecord, deterministic_tol: float = DETERMINISTIC_TOL
) -> ComparisonReport:
    """
    Trace distance between two trajectories at every grid time.

    Deterministic pairs are held to ``deterministic_tol``; when either side carries Monte Carlo
    standard errors the tolerance at each time is 3 sigma of the trace distance, never below the
    deterministic one.

    Raises:
        GridError: If the trajectories are on different grids
    """
    if a.states is None or b.states is None:
        raise ValidationError("Both trajectories must carry states to be compared")
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-12):
        raise GridError(f"{a.method} and {b.method} trajectories are on different grids")

    distances = 0.5 * trace_norms(np.asarray(a.states) - np.asarray(b.states))
    tolerances = np.full(len(a.times), deterministic_tol)
    errors = [np.asarray(r.stderr) for r in (a, b) if r.stderr is not None]
    if errors:
        combined = np.sqrt(sum(np.square(e) for e in errors))
        tolerances = np.maximum(tolerances, SIGMA_MULTIPLE * monte_carlo_sigma(combined))

    report = ComparisonReport(a.method, b.method, np.asarray(a.times), distances, tolerances)
    if report.passed:
        logger.info(f"{a.method} vs {b.method}: max distance {report.max_distance:.3e}")
    else:
        failing = int(np.sum(~report.within))
        logger.warning(
            f"{a.method} vs {b.method}: {failing} of {len(a.times)} times out of tolerance "
            f"(max distance {report.max_distance:.3e})"
        )
    return report


def compare_methods(
    method_a: str,
    method_b: str,
    x: MixtureWeights,
    rho0: DensityMatrix,
    grid: TimeGrid,
    options: RealisationOptions | None = None,
    deterministic_tol: float = DETERMINISTIC_TOL,
) -> ComparisonReport:
    """Run two realisations on one grid and compare them."""
    options = options or RealisationOptions()
    first = realise(method_a, x, rho0, grid, options)
    second = realise(method_b, x, rho0, grid, options)
    return compare(first, second, deterministic_tol)
