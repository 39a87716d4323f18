"""Deterministic RNG construction and stream splitting.

All randomness in the package flows through numpy's PCG64 generator; a given
seed produces the same sequence on every platform. Derived streams are keyed
by (seed, *path) so per-image / per-step work is independent of worker count
and scheduling order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def split_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path); order-sensitive, collision-free."""
    return np.random.default_rng([int(seed), *[int(p) for p in path]])
