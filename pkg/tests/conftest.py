"""Shared builders and independent oracles.

The oracles here deliberately avoid the library's own code paths: bits are
read back with Python integer shifts, distances are counted entry by entry,
and sorting goes through Python's stable sort. They exist to check the fast
implementations against first principles.
"""

from __future__ import annotations

import numpy as np
import pytest

from codecascade import (
    CodeLengthSchedule,
    MultiLevelCodebook,
    PackedCodeMatrix,
    pack_codes,
)


def naive_unpack(matrix: PackedCodeMatrix) -> np.ndarray:
    """Per-bit unpacker using Python ints only (independent of unpack_codes)."""
    out = np.zeros((matrix.n_items, matrix.length), dtype=np.uint8)
    for i in range(matrix.n_items):
        for j in range(matrix.length):
            word = int(matrix.words[i, j // 64])
            out[i, j] = (word >> (j % 64)) & 1
    return out


def naive_hamming(bits_a, bits_b) -> int:
    return int(sum(int(a) != int(b) for a, b in zip(bits_a, bits_b)))


def stable_rank(distances) -> list[int]:
    """Index ranking by (distance, index) via Python's stable sort."""
    return sorted(range(len(distances)), key=lambda i: (distances[i], i))


def random_codebook(
    rng: np.random.Generator,
    n_items: int,
    lengths=(16, 64),
    n_ids: int | None = None,
    cams: int = 3,
) -> MultiLevelCodebook:
    """Codebook of uniformly random codes with round-robin ids and cameras."""
    schedule = CodeLengthSchedule(lengths)
    levels = [
        pack_codes(rng.integers(0, 2, size=(n_items, l), dtype=np.uint8), l)
        for l in schedule
    ]
    n_ids = n_ids or max(1, n_items // 2)
    ids = (np.arange(n_items) % n_ids).astype(np.uint32)
    cam = (np.arange(n_items) % cams).astype(np.uint16)
    return MultiLevelCodebook(schedule, levels, ids, cam)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
