"""Hamming-distance kernels, linear-time ranking, and threshold selection.

All distances are exact popcounts over 64-bit words; ranking is a stable
counting sort over the bounded distance domain [0, code length]. Every
function here is pure over immutable inputs, so callers may fan queries out
across threads freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .codebook import PackedCodeMatrix, words_per_row


@dataclass
class DistanceVector:
    """Per-gallery-item Hamming distances measured at one code length."""

    values: np.ndarray
    level_length: int


class CountingSortBuckets:
    """Stable distance-bucket ranking.

    ``order`` lists gallery indices sorted by (distance, index); bucket d is
    the slice ``order[offsets[d]:offsets[d+1]]``.
    """

    __slots__ = ("order", "offsets", "level_length")

    def __init__(self, order: np.ndarray, offsets: np.ndarray, level_length: int):
        self.order = order
        self.offsets = offsets
        self.level_length = level_length

    @property
    def n_items(self) -> int:
        return len(self.order)

    def bucket(self, d: int) -> np.ndarray:
        if d < 0 or d > self.level_length:
            raise ValueError(f"distance {d} outside [0, {self.level_length}]")
        return self.order[self.offsets[d] : self.offsets[d + 1]]

    def buckets(self) -> list[np.ndarray]:
        return [self.bucket(d) for d in range(self.level_length + 1)]

    def flatten(self) -> np.ndarray:
        return self.order


def hamming_distance(a: np.ndarray, b: np.ndarray, length: int) -> int:
    """Differing-bit count between two packed rows of `length` bits."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    wpr = words_per_row(length)
    if a.shape != (wpr,) or b.shape != (wpr,):
        raise ValueError(
            f"length mismatch: rows of {a.shape}/{b.shape} words, need {wpr} for {length} bits"
        )
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def batch_distances(query_row: np.ndarray, gallery: PackedCodeMatrix) -> DistanceVector:
    """Hamming distance from one packed query row to every gallery row."""
    query_row = np.asarray(query_row, dtype=np.uint64)
    if query_row.shape != (gallery.words.shape[1],):
        raise ValueError(
            f"length mismatch: query has {query_row.shape} words, "
            f"gallery rows have {gallery.words.shape[1]}"
        )
    xor = np.bitwise_xor(gallery.words, query_row)
    values = np.bitwise_count(xor).sum(axis=1, dtype=np.int32)
    return DistanceVector(values=values, level_length=gallery.length)


def euclidean_distance(a, b) -> float:
    """Plain L2 distance between two real vectors (benchmark baseline)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return math.sqrt(float(np.dot(diff, diff)))


def batch_euclidean_distances(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """L2 distance from one real query to every gallery row (benchmark baseline)."""
    query = np.asarray(query, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.ndim != 2 or query.shape != (gallery.shape[1],):
        raise ValueError(f"dimension mismatch: {query.shape} vs {gallery.shape}")
    diff = gallery - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


@njit(cache=True)
def _counting_sort(values, max_key):
    n = values.shape[0]
    offsets = np.zeros(max_key + 2, dtype=np.int64)
    for i in range(n):
        offsets[values[i] + 1] += 1
    for d in range(1, max_key + 2):
        offsets[d] += offsets[d - 1]
    order = np.empty(n, dtype=np.int64)
    cursor = offsets[: max_key + 1].copy()
    for i in range(n):
        v = values[i]
        order[cursor[v]] = i
        cursor[v] += 1
    return order, offsets


def counting_sort_rank(d: DistanceVector) -> CountingSortBuckets:
    """Bucket gallery indices by distance in one counting pass plus emission."""
    values = np.ascontiguousarray(d.values, dtype=np.int32)
    if values.size:
        lo, hi = values.min(), values.max()
        if lo < 0 or hi > d.level_length:
            raise ValueError(
                f"distance {lo if lo < 0 else hi} outside [0, {d.level_length}]"
            )
    order, offsets = _counting_sort(values, d.level_length)
    return CountingSortBuckets(order, offsets, d.level_length)


def select_within(buckets: CountingSortBuckets, t: int) -> np.ndarray:
    """Indices at distance <= t, in ranked order. t = -1 selects nothing."""
    if t == -1:
        return buckets.order[:0]
    if t < -1 or t > buckets.level_length:
        raise ValueError(f"threshold {t} outside [-1, {buckets.level_length}]")
    return buckets.order[: buckets.offsets[t + 1]]
