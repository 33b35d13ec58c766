"""Reproducible random streams and chunked Monte Carlo reduction."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from .errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 20_000


def chunk_sizes(total: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[int]:
    """Split ``total`` samples into chunks of at most ``chunk_size``."""
    if total < 1:
        raise ValidationError(f"Sample count must be positive, got {total}")
    if chunk_size < 1:
        raise ValidationError(f"Chunk size must be positive, got {chunk_size}")
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def stream_generators(seed: int | None, n_streams: int) -> list[np.random.Generator]:
    """
    Independent counter-based generators spawned from one master seed.

    Each child of ``SeedSequence(seed)`` keys its own Philox stream, so chunk i draws the same
    numbers whatever the chunk count or execution order.
    """
    children = np.random.SeedSequence(seed).spawn(n_streams)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def make_rng(seed: int | None) -> np.random.Generator:
    return stream_generators(seed, 1)[0]


@dataclass
class MomentAccumulator:
    """Running count, sum and sum of squares; merging two accumulators is associative."""

    count: int = 0
    total: np.ndarray | float = 0.0
    total_sq: np.ndarray | float = 0.0

    def add(self, samples: np.ndarray) -> None:
        """Add a batch of samples stacked along axis 0."""
        samples = np.asarray(samples, dtype=np.float64)
        self.count += samples.shape[0]
        self.total = self.total + samples.sum(axis=0)
        self.total_sq = self.total_sq + np.square(samples).sum(axis=0)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        return MomentAccumulator(
            self.count + other.count, self.total + other.total, self.total_sq + other.total_sq
        )

    @property
    def mean(self) -> np.ndarray:
        return np.asarray(self.total) / self.count

    @property
    def stderr(self) -> np.ndarray:
        """Standard error of the mean (unbiased variance); zero for a single sample."""
        if self.count < 2:
            return np.zeros_like(self.mean)
        var = (np.asarray(self.total_sq) - self.count * self.mean**2) / (self.count - 1)
        return np.sqrt(np.clip(var, 0.0, None) / self.count)


def progress_enabled() -> bool:
    return logging.getLogger("src").getEffectiveLevel() <= logging.INFO


def run_chunked(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    total: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    desc: str = "samples",
) -> MomentAccumulator:
    """
    Draw ``total`` samples in chunks and reduce them to moments.

    Every chunk runs on its own child stream spawned from ``rng``, so the result depends only on
    the generator's seed and the chunk size.

    Args:
        sampler: ``sampler(rng, n)`` returning n samples stacked along axis 0
        total: Number of samples
        rng: Parent generator
        chunk_size: Samples per chunk
        desc: Progress-bar label

    Returns:
        MomentAccumulator over all samples
    """
    sizes = chunk_sizes(total, chunk_size)
    streams = rng.spawn(len(sizes))
    logger.info(f"Drawing {total} {desc} in {len(sizes)} chunks")

    acc = MomentAccumulator()
    for child, size in tqdm(
        zip(streams, sizes, strict=True),
        total=len(sizes),
        desc=desc,
        disable=not progress_enabled(),
    ):
        acc.add(sampler(child, size))
    return acc
