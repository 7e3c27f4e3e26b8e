"""Estimates, streaming moments, deterministic streams and KS helpers."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

__all__ = [
    "CHUNK",
    "Estimate",
    "Moments",
    "stream",
    "run_chunks",
    "ks_distance",
    "ks_2samp_distance",
    "ks_threshold",
]

CHUNK = 1 << 15

# stream purposes, so independent estimators never share random numbers
PURPOSES = {"path": 0, "lhs": 1, "rhs": 2, "direct": 3, "restart": 4, "grid": 5, "walk": 6, "fdd": 7, "misc": 9}


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n_samples: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Estimate":
        return Moments.of(np.asarray(x, dtype=float)).estimate()

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.std_error

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Moments:
    """Count, mean and centred second moment; merges by Chan's pairwise rule."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x: np.ndarray) -> "Moments":
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        return cls(int(x.size), mu, float(np.sum((x - mu) ** 2)))

    def merge(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Moments(n, mean, m2)

    @staticmethod
    def reduce(parts: Sequence["Moments"]) -> "Moments":
        """Fixed balanced tree, so the result does not depend on scheduling."""
        parts = list(parts)
        if not parts:
            return Moments()
        while len(parts) > 1:
            parts = [parts[i].merge(parts[i + 1]) if i + 1 < len(parts) else parts[i] for i in range(0, len(parts), 2)]
        return parts[0]

    def estimate(self) -> Estimate:
        if self.n == 0:
            raise ValueError("no samples")
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return Estimate(self.mean, math.sqrt(var / self.n), self.n)


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Random stream derived from (master seed, purpose, index)."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(PURPOSES[purpose], int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def run_chunks(
    fn: Callable[[int, int, np.random.Generator], object],
    n: int,
    seed: int,
    purpose: str,
    threads: int = 1,
    chunk: int = CHUNK,
) -> list:
    """Evaluate fn(chunk_index, size, rng) over fixed-size chunks, in order.

    Chunk boundaries and streams depend only on (n, seed, purpose), never on
    the thread count.
    """
    sizes = [min(chunk, n - s) for s in range(0, n, chunk)]
    jobs = [(k, size, stream(seed, purpose, k)) for k, size in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def ks_distance(sample: np.ndarray, cdf) -> float:
    return float(sps.kstest(np.asarray(sample), cdf).statistic)


def ks_2samp_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(sps.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def ks_threshold(n: int, m: int | None = None, alpha: float = 0.01) -> float:
    """Asymptotic KS rejection threshold at level alpha."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))
