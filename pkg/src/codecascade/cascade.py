"""Coarse-to-fine ranking: short codes rank everything, calibrated distance
thresholds keep a shrinking candidate set, longer codes refine the survivors.

Stage 1 ranks the full gallery at the shortest length. Stage k (k >= 2) keeps
the stage-(k-1) candidates whose level-(k-1) distance is at most t_k and
re-ranks them at level k. The final ordering is the last stage's refined list
followed by the eliminated items of stages N..2, each group in the order it
held when eliminated.

Ties inside any stage break by ascending gallery index, so a cascade with all
filtering disabled reproduces a single-level ranking bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .codebook import InvariantViolation, MultiLevelCodebook, ThresholdSet
from .hamming import batch_distances, counting_sort_rank, select_within


@dataclass(frozen=True)
class QueryCodes:
    """One packed code per level, lengths matching the gallery schedule."""

    rows: tuple[np.ndarray, ...]
    lengths: tuple[int, ...]

    @classmethod
    def from_codebook(cls, cb: MultiLevelCodebook, item: int) -> "QueryCodes":
        return cls(
            rows=tuple(level.row(item) for level in cb.levels),
            lengths=tuple(cb.schedule),
        )


@dataclass
class RankedResult:
    """Final gallery ordering plus per-stage candidate counts and timings."""

    order: np.ndarray
    stage_candidate_counts: list[int] = field(default_factory=list)
    stage_times: list[float] = field(default_factory=list)
    total_time: float = 0.0


def _check_query(q: QueryCodes, cb: MultiLevelCodebook) -> None:
    if q.lengths != tuple(cb.schedule):
        raise InvariantViolation(
            f"query lengths {q.lengths} do not match gallery schedule {tuple(cb.schedule)}"
        )


def full_rank(q: QueryCodes, cb: MultiLevelCodebook, level: int) -> RankedResult:
    """Rank the whole gallery with the single code of 1-based `level`."""
    _check_query(q, cb)
    if not 1 <= level <= cb.n_levels:
        raise InvariantViolation(f"level {level} outside [1, {cb.n_levels}]")
    start = time.perf_counter()
    buckets = counting_sort_rank(batch_distances(q.rows[level - 1], cb.levels[level - 1]))
    elapsed = time.perf_counter() - start
    return RankedResult(
        order=buckets.flatten(),
        stage_candidate_counts=[cb.n_items],
        stage_times=[elapsed],
        total_time=elapsed,
    )


def ctf_search(q: QueryCodes, cb: MultiLevelCodebook, t: ThresholdSet) -> RankedResult:
    """Coarse-to-fine search over all levels, gated by the threshold set."""
    _check_query(q, cb)
    if t.lengths != tuple(cb.schedule):
        raise InvariantViolation(
            f"threshold lengths {t.lengths} do not match gallery schedule {tuple(cb.schedule)}"
        )
    n_levels = cb.n_levels
    if n_levels < 2:
        raise InvariantViolation("cascade needs at least two levels")

    start = time.perf_counter()
    buckets = counting_sort_rank(batch_distances(q.rows[0], cb.levels[0]))
    stage_times = [time.perf_counter() - start]
    counts = [cb.n_items]
    ranked_ids = buckets.flatten()

    eliminated: list[np.ndarray] = []
    for k in range(2, n_levels + 1):
        stage_start = time.perf_counter()
        # the selection is a prefix of the previous ranking, already in id form
        cut = len(select_within(buckets, t.thresholds[k - 2]))
        survivors = ranked_ids[:cut]
        eliminated.append(ranked_ids[cut:])
        counts.append(len(survivors))
        if len(survivors) == 0:
            ranked_ids = survivors
            stage_times.append(time.perf_counter() - stage_start)
            # later stages see no candidates; record them as empty
            counts.extend([0] * (n_levels - k))
            stage_times.extend([0.0] * (n_levels - k))
            break
        candidates = np.sort(survivors)  # ascending ids so ties break by index
        level = cb.levels[k - 1]
        buckets = counting_sort_rank(batch_distances(q.rows[k - 1], level.take(candidates)))
        ranked_ids = candidates[buckets.flatten()]
        stage_times.append(time.perf_counter() - stage_start)

    order = np.concatenate([ranked_ids] + eliminated[::-1]) if eliminated else ranked_ids
    return RankedResult(
        order=order,
        stage_candidate_counts=counts,
        stage_times=stage_times,
        total_time=sum(stage_times),
    )
