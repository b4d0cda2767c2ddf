"""Length normalization of noisy copies into a fixed ``(v, K)`` decoder input.

Bases ``{A, C, G, T} = {0, 1, 2, 3}`` are shifted to ``{1, 2, 3, 4}`` and the
pad symbol Q is 0. Copies shorter than ``K`` are right-padded with Q, longer
ones are truncated.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

PAD = 0
PAD_MARGIN = 2


def compute_K(k: int) -> int:
    """Normalized copy length for a length-``k`` sequence."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return k + PAD_MARGIN


def pad_and_map(copies: Sequence[np.ndarray], K: int) -> np.ndarray:
    """Stack ``v`` variable-length copies into a ``(v, K)`` int8 bundle."""
    if len(copies) == 0:
        raise ValueError("pad_and_map needs at least one copy")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    bundle = np.full((len(copies), K), PAD, dtype=np.int8)
    for row, copy in zip(bundle, copies):
        copy = np.asarray(copy)[:K]
        row[: len(copy)] = copy + 1
    return bundle


def strip_pad(row) -> np.ndarray:
    """Invert the mapping for one bundle row: drop Q symbols and shift back to {0..3}."""
    row = np.asarray(row)
    return (row[row != PAD] - 1).astype(np.int8)
