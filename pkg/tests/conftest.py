"""Pytest configuration and shared fixtures."""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.qubit_core import BlochVector, MixtureWeights, from_bloch  # noqa: E402
from src.rng import make_rng  # noqa: E402

# Configure logging for tests
logging.basicConfig(
    level=logging.WARNING,  # Reduce noise during tests
    format="%(levelname)s - %(name)s - %(message)s",
)


@pytest.fixture
def rng():
    """Seeded generator; every test gets a fresh stream."""
    return make_rng(12345)


@pytest.fixture
def enm():
    """Weights (1/2, 1/2, 0) of the eternally non-Markovian master equation."""
    return MixtureWeights(0.5, 0.5, 0.0)


@pytest.fixture
def generic_weights():
    return MixtureWeights(0.6, 0.3, 0.1)


@pytest.fixture
def plus_state():
    return from_bloch(BlochVector(1.0, 0.0, 0.0))


@pytest.fixture
def tilted_state():
    """Mixed state with all three Bloch components non-zero."""
    return from_bloch(BlochVector(0.5, 0.5, 0.5))


@pytest.fixture
def simplex_points():
    """1000 uniform points of the open simplex."""
    return make_rng(2024).dirichlet(np.ones(3), size=1000)


@pytest.fixture
def random_weights(simplex_points):
    return [MixtureWeights.from_array(p / p.sum()) for p in simplex_points[:20]]
