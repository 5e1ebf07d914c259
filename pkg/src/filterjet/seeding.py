"""Deterministic child seeds derived from one root seed and string labels.

Every stochastic component takes its stream from the run's single seed
plus a stable label, so re-running any experiment with the same config
reproduces it bit for bit, including when cells run out of order.
"""
from __future__ import annotations

import hashlib

import numpy as np


def labeled_seed(root: int, *labels) -> int:
    """A 63-bit child seed from the root seed and a label path."""
    digest = hashlib.blake2b(
        repr((int(root),) + tuple(str(l) for l in labels)).encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") >> 1


def labeled_rng(root: int, *labels) -> np.random.Generator:
    """Generator seeded by :func:`labeled_seed`."""
    return np.random.default_rng(labeled_seed(root, *labels))
