"""Parameter-triangle analysis: rate-sign regions, onset times and area fractions."""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.optimize import bisect

from .analytic import rate_arrays, scaled_rate_arrays
from .errors import ValidationError
from .qubit_core import MixtureWeights
from .rng import DEFAULT_CHUNK_SIZE, make_rng, run_chunked

logger = logging.getLogger(__name__)

AreaMethod = Literal["paper-quadrature", "boundary-quadrature", "monte-carlo"]
AREA_METHODS: tuple[str, ...] = ("paper-quadrature", "boundary-quadrature", "monte-carlo")

ALL_NONNEG = "all-nonneg"
RATE_TOL = 1e-10
ASYMPTOTIC_TOL = 1e-12
ONSET_XTOL = 1e-10
# Largest x_k at which the gamma_k region persists: root of x^2 + 4x - 1
CUBIC_END = np.sqrt(5.0) - 2.0


@dataclass(frozen=True)
class RegionCell:
    x: MixtureWeights
    t: float
    status: str


def negative_status(k: int) -> str:
    return f"gamma_{k}-negative"


def barycentric_grid(resolution: int) -> np.ndarray:
    """
    All points (i, j, resolution - i - j) / resolution of the closed simplex.

    Raises:
        ValidationError: If resolution < 2
    """
    if resolution < 2:
        raise ValidationError(f"Grid resolution must be at least 2, got {resolution}")
    i, j = np.meshgrid(np.arange(resolution + 1), np.arange(resolution + 1), indexing="ij")
    keep = i + j <= resolution
    points = np.stack([i[keep], j[keep], resolution - i[keep] - j[keep]], axis=1)
    return points / resolution


def classify_points(points: np.ndarray, t: float) -> np.ndarray:
    """
    Rate-sign status of many simplex points at time t.

    Returns:
        Array of status strings; at most one rate is negative per point

    Raises:
        GridError: If t is negative or not finite
    """
    gammas, _ = rate_arrays(points, t)
    negative = gammas < -RATE_TOL
    counts = negative.sum(axis=1)
    if np.any(counts > 1):
        bad = points[counts > 1][0]
        logger.warning(f"More than one negative rate at x={bad}, t={t}")
    status = np.full(points.shape[0], ALL_NONNEG, dtype=object)
    for k in range(3):
        status[negative[:, k]] = negative_status(k + 1)
    return status


def region_grid(t: float, resolution: int) -> list[RegionCell]:
    """Classify every barycentric grid cell by the signs of its rates at time t."""
    points = barycentric_grid(resolution)
    status = classify_points(points, t)
    return [
        RegionCell(MixtureWeights.from_array(p), float(t), str(s))
        for p, s in zip(points, status, strict=True)
    ]


def region_frame(t: float, resolution: int) -> pd.DataFrame:
    """Region grid as a table with columns x1, x2, x3, t, status."""
    points = barycentric_grid(resolution)
    status = classify_points(points, t)
    logger.info(
        f"Region grid at t={t}: {np.sum(status == ALL_NONNEG)} of {len(status)} cells all-nonneg"
    )
    return pd.DataFrame(
        {
            "x1": points[:, 0],
            "x2": points[:, 1],
            "x3": points[:, 2],
            "t": float(t),
            "status": status.astype(str),
        }
    )


def asymptotic_margins(points: np.ndarray) -> np.ndarray:
    """1/x_j + 1/x_k - 1/x_i - 1 for each cyclic triple; shape (n, 3), interior points only."""
    inv = 1.0 / np.asarray(points, dtype=np.float64)
    return inv.sum(axis=1, keepdims=True) - 2.0 * inv - 1.0


def asymptotic_mask(points: np.ndarray) -> np.ndarray:
    """Vectorised ``asymptotic_cp_divisible`` for points of shape (n, 3)."""
    points = np.asarray(points, dtype=np.float64)
    zeros = np.sum(points == 0.0, axis=1)
    interior = zeros == 0
    mask = zeros == 2
    with np.errstate(divide="ignore"):
        margins = asymptotic_margins(np.where(interior[:, None], points, 1.0))
    mask[interior] = np.all(margins[interior] >= -ASYMPTOTIC_TOL, axis=1)
    return mask


def asymptotic_cp_divisible(x: MixtureWeights) -> bool:
    """
    Whether all rates stay non-negative for all times.

    Vertices are semigroups (true); edge points with exactly one zero weight have a rate that is
    negative for all t > 0 (false); interior points need 1/x_j + 1/x_k - 1/x_i >= 1 for every
    cyclic triple.
    """
    return bool(asymptotic_mask(x.as_array()[None, :])[0])


def onset_time(x: MixtureWeights) -> float | None:
    """
    Time after which one rate is negative for good, or None if the point stays CP-divisible.

    Edge points return 0. Interior points bisect the sign change of the eventually negative rate
    (in its e^{2t}-scaled form) to 1e-10.
    """
    if asymptotic_cp_divisible(x):
        return None

    weights = x.as_array()
    if np.any(weights == 0.0):
        return 0.0

    k = int(np.argmin(asymptotic_margins(weights[None, :])[0]))

    def gamma_k(t: float) -> float:
        return float(scaled_rate_arrays(weights, t)[k])

    upper = 1.0
    while gamma_k(upper) >= 0.0:
        upper *= 2.0
        if upper > 1e3:
            raise ValidationError(f"No sign change of gamma_{k + 1} found for x={weights}")
    root = bisect(gamma_k, 0.0, upper, xtol=ONSET_XTOL)
    logger.debug(f"Onset of gamma_{k + 1} < 0 for x={weights}: t*={root:.12g}")
    return float(root)


def printed_integrand(x: float) -> float:
    """Printed integrand 6x(3 - 3x - 3x^2 - x^3) / (sqrt(g)(1 - x^2)(1 + x)), g = 1 - 4x/(1-x^2)."""
    g = 1.0 - 4.0 * x / (1.0 - x * x)
    if g <= 0.0:
        return 0.0
    numerator = 6.0 * x * (3.0 - 3.0 * x - 3.0 * x**2 - x**3)
    return numerator / (np.sqrt(g) * (1.0 - x * x) * (1.0 + x))


def boundary_integrand(x: float) -> float:
    """Length 6 (1 - x) sqrt(1 - 4x/(1 - x^2)) of the non-CP-divisible cross-section at x_k = x."""
    g = 1.0 - 4.0 * x / (1.0 - x * x)
    return 6.0 * (1.0 - x) * np.sqrt(max(g, 0.0))


def monte_carlo_area(
    samples: int, rng: np.random.Generator, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> tuple[float, float]:
    """
    Fraction of uniform simplex points that are not asymptotically CP-divisible.

    Points come from normalised exponential spacings, which are exactly uniform on the triangle.

    Returns:
        Tuple (fraction, standard error)
    """

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        spacings = gen.exponential(1.0, size=(n, 3))
        points = spacings / spacings.sum(axis=1, keepdims=True)
        return (~asymptotic_mask(points)).astype(np.float64)

    acc = run_chunked(sampler, samples, rng, chunk_size, desc="simplex points")
    return float(acc.mean), float(acc.stderr)


def area_fraction(
    method: AreaMethod = "paper-quadrature",
    samples: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> float:
    """
    Fraction of the parameter triangle that is not asymptotically CP-divisible.

    Args:
        method: ``paper-quadrature`` (printed 1-D integral), ``boundary-quadrature`` (area
            enclosed by the cubic boundary) or ``monte-carlo``
        samples: Number of simplex points for ``monte-carlo`` (at least 10^4)
        rng: Generator for ``monte-carlo`` (seed 0 when omitted)

    Returns:
        The non-CP-divisible fraction (about 0.87)

    Raises:
        ValidationError: If the method is unknown or too few samples are requested
    """
    if method == "paper-quadrature":
        value, error = quad(printed_integrand, 0.0, CUBIC_END, limit=200, epsabs=1e-12)
    elif method == "boundary-quadrature":
        value, error = quad(boundary_integrand, 0.0, CUBIC_END, limit=200, epsabs=1e-12)
    elif method == "monte-carlo":
        if samples < 10_000:
            raise ValidationError(f"Monte Carlo area needs at least 10^4 samples, got {samples}")
        value, error = monte_carlo_area(samples, make_rng(0) if rng is None else rng)
    else:
        raise ValidationError(f"Invalid area method: {method}. Must be one of {AREA_METHODS}")

    logger.info(f"Area fraction ({method}): {value:.6f} +/- {error:.2e}")
    return float(value)


def newton_cubic_boundary(n_points: int = 200) -> pd.DataFrame:
    """
    Plot data for the boundary of the asymptotic area.

    With x = x_k and y = x_i x_j / (x_i + x_j)^2 the boundary of the gamma_k region is the cubic
    x^2 y + x - y = 0 for x in [0, sqrt(5) - 2]. Each (x, y) maps to two triangle points
    x_i = (1 - x)(1 +/- sqrt(1 - 4y))/2, emitted for every k.

    Returns:
        DataFrame with columns k, branch, x, y, x1, x2, x3
    """
    xs = np.linspace(0.0, CUBIC_END, n_points)
    ys = xs / (1.0 - xs**2)
    spread = np.sqrt(np.clip(1.0 - 4.0 * ys, 0.0, None))

    rows = []
    for k in range(3):
        i, j = [m for m in range(3) if m != k]
        for branch, sign in (("upper", 1.0), ("lower", -1.0)):
            points = np.zeros((n_points, 3))
            points[:, k] = xs
            points[:, i] = (1.0 - xs) * (1.0 + sign * spread) / 2.0
            points[:, j] = (1.0 - xs) - points[:, i]
            rows.append(
                pd.DataFrame(
                    {
                        "k": k + 1,
                        "branch": branch,
                        "x": xs,
                        "y": ys,
                        "x1": points[:, 0],
                        "x2": points[:, 1],
                        "x3": points[:, 2],
                    }
                )
            )
    return pd.concat(rows, ignore_index=True)
