"""Reproducible, splittable random streams.

Every stochastic operation in this package receives an explicit
:class:`RngStream`.  Streams are identified by a master seed and an integer
path; child streams are derived by appending indices to the path.  Two
streams with different paths are statistically independent, and the same
(seed, path) pair always reproduces the same draws, which makes parallel
Monte Carlo loops reproducible regardless of scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

__all__ = ["RngStream"]


@dataclass(frozen=True)
class RngStream:
    """A counter-based random stream keyed by (master_seed, path)."""

    master_seed: int
    path: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))

    def child(self, *indices: int) -> "RngStream":
        """Derive an independent stream by extending the path."""
        return RngStream(self.master_seed, self.path + indices)

    def generator(self) -> np.random.Generator:
        """Materialize a fresh counter-based generator for this stream."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))
