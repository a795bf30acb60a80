"""Deterministic random streams.

Every stochastic operation in the package draws from a Philox 4x64
counter-based generator keyed by ``(seed, stream tag)``. Philox is a named,
platform-independent algorithm, so the same seed reproduces the same draws
bit-for-bit on any machine and under any degree of parallelism. Distinct
purposes (signal, noise, masking, ...) get distinct tags, so adding draws to
one stream never perturbs another.

Replication streams for Monte Carlo work are derived as ``base_seed XOR
rep_index``.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

_MASK64 = (1 << 64) - 1


class Stream(IntEnum):
    """Tags naming the independent random streams derived from one seed."""

    SIGNAL = 1
    NOISE = 2
    MASK = 3
    TREATMENT = 4
    OUTCOME = 5
    FOLDS = 6
    PRIVACY = 7


def derive_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox generator keyed by (seed, stream tag)."""
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def replication_seed(base_seed: int, rep_index: int) -> int:
    """Seed for replication ``rep_index``: ``base_seed XOR rep_index``."""
    return (int(base_seed) ^ int(rep_index)) & _MASK64
