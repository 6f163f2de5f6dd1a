"""Reproducible random-number substreams.

Every Monte Carlo routine in this package draws from numbered substreams of
a single 64-bit seed.  A substream is a Philox (counter-based) generator
keyed by ``SeedSequence(seed, spawn_key=key)``, so the random numbers a
routine consumes depend only on ``(seed, key)`` -- never on thread
scheduling or on how many other streams were consumed first.
"""

from __future__ import annotations

import numpy as np

_MAX_SEED = 2**64 - 1


class RngStreams:
    """A family of independent, reproducible random substreams.

    Parameters
    ----------
    seed : int
        Master seed, in [0, 2**64).
    substreams : int
        Number of worker substreams Monte Carlo drivers partition their
        samples over.  Part of the reproducibility contract: estimates are
        bitwise functions of (seed, substreams, n_samples).
    """

    def __init__(self, seed: int, substreams: int = 16):
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
        if not 0 <= int(seed) <= _MAX_SEED:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not isinstance(substreams, (int, np.integer)) or substreams < 1:
            raise ValueError("substreams must be a positive integer")
        self.seed = int(seed)
        self.substreams = int(substreams)

    def child(self, *key: int) -> np.random.Generator:
        """Generator for the substream addressed by an integer tuple key."""
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.Philox(ss))

    def stream(self, k: int) -> np.random.Generator:
        """Generator for worker substream k (0-based)."""
        if not 0 <= k < self.substreams:
            raise ValueError(f"substream index {k} outside [0, {self.substreams})")
        return self.child(k)

    def blocks(self, n: int) -> list[tuple[int, int]]:
        """Deterministic partition of n samples into per-substream blocks.

        Returns [(stream_index, count), ...] with counts summing to n; the
        first ``n % substreams`` streams take one extra sample.
        """
        if n < 0:
            raise ValueError("sample count must be nonnegative")
        base, rem = divmod(n, self.substreams)
        out = []
        for k in range(self.substreams):
            count = base + (1 if k < rem else 0)
            if count:
                out.append((k, count))
        return out


def generator(seed: int) -> np.random.Generator:
    """One-off Philox generator for a plain seed (no substream structure)."""
    return RngStreams(seed, 1).child(0)
