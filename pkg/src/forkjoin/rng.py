"""Seeded, label-addressed random streams and exponential sampling.

Every stream is a numpy ``PCG64`` generator seeded from
``SeedSequence(entropy=seed, spawn_key=(label_key,))`` where ``label_key`` is
the first 8 bytes (big-endian) of ``sha256(label)``. Both PCG64 and the
SeedSequence hashing are fixed, platform-independent algorithms, so a
``(seed, label)`` pair always yields the same sequence, and streams with
different labels are statistically independent.

Uniforms are built from 52 random bits as ``(2k + 1) / 2**53`` so they lie
strictly inside (0, 1) and ``-log(u)`` is always finite and positive.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import NonPositiveRate

_TWO_M53 = 2.0 ** -53


def label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


class RngStream:
    """A single-owner random stream identified by ``(seed, label)``."""

    def __init__(self, seed: int, label: str):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.label = label
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(label_key(label),))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    def uniforms(self, size: int) -> np.ndarray:
        k = self._gen.integers(0, 2 ** 52, size=size, dtype=np.uint64)
        return (2.0 * k.astype(np.float64) + 1.0) * _TWO_M53

    def exponentials(self, rate: float, size: int) -> np.ndarray:
        """``size`` i.i.d. exponential(rate) draws as ``-log(u) / rate``."""
        _check_rate(rate)
        return -np.log(self.uniforms(size)) / rate


def _check_rate(rate: float) -> None:
    if not rate > 0:
        raise NonPositiveRate(f"rate must be > 0, got {rate}")


def sample_exponential(rate: float, s: RngStream) -> float:
    return float(s.exponentials(rate, 1)[0])


def generate_arrival_times(lam: float, count: int, s: RngStream) -> np.ndarray:
    """Arrival epochs of a Poisson process: cumulative sums of exponential gaps."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return np.cumsum(s.exponentials(lam, count))
