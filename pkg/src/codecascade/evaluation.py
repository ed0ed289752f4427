"""Retrieval accuracy (CMC / mAP) and query-time aggregation.

Follows the standard single-query person-search protocol: gallery items that
share both the person id and the camera id with the query are junk (they show
the same capture) and are dropped from the ranking before scoring, as are
items carrying the junk id sentinel. Queries left with no relevant gallery
item are skipped and counted, not scored as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import JUNK_PERSON_ID, MultiLevelCodebook
from .cascade import RankedResult


@dataclass
class EvalOutcome:
    rank1: float
    cmc_curve: np.ndarray
    map: float
    mean_query_time: float
    per_stage_mean_times: list[float]
    n_queries_scored: int
    n_queries_skipped: int
    gallery_size: int


def valid_gallery_mask(query_id, query_cam, gallery_ids, gallery_cams) -> np.ndarray:
    """True for gallery items that may be counted for this query."""
    gallery_ids = np.asarray(gallery_ids)
    gallery_cams = np.asarray(gallery_cams)
    if gallery_ids.shape != gallery_cams.shape:
        raise ValueError(
            f"gallery ids/cams length mismatch: {gallery_ids.shape} vs {gallery_cams.shape}"
        )
    junk = (gallery_ids == query_id) & (gallery_cams == query_cam)
    junk |= gallery_ids == JUNK_PERSON_ID
    return ~junk


def average_precision(order, relevance) -> float:
    """Mean over relevant items of precision at their rank.

    `order` ranks (already masked) gallery indices best first; `relevance`
    flags relevant items, indexed the same way as the ids arrays.
    """
    order = np.asarray(order)
    relevance = np.asarray(relevance, dtype=bool)
    hits = relevance[order]
    n_rel = int(hits.sum())
    if n_rel == 0:
        raise ValueError("no relevant items for this query")
    ranks = np.flatnonzero(hits) + 1
    precision_at_hits = np.arange(1, n_rel + 1, dtype=np.float64) / ranks
    return float(precision_at_hits.mean())


def evaluate(
    results: list[RankedResult],
    cb: MultiLevelCodebook,
    query_ids,
    query_cams,
) -> EvalOutcome:
    """Aggregate CMC, mAP, and timing over per-query ranked results."""
    query_ids = np.asarray(query_ids)
    query_cams = np.asarray(query_cams)
    if not (len(results) == len(query_ids) == len(query_cams)):
        raise ValueError(
            f"got {len(results)} results for {len(query_ids)} ids / {len(query_cams)} cams"
        )
    gallery_ids = cb.person_ids
    gallery_cams = cb.camera_ids
    n = cb.n_items

    first_hit_ranks = []
    aps = []
    skipped = 0
    for res, qid, qcam in zip(results, query_ids, query_cams):
        mask = valid_gallery_mask(qid, qcam, gallery_ids, gallery_cams)
        kept = res.order[mask[res.order]]
        hits = gallery_ids[kept] == qid
        n_rel = int(hits.sum())
        if n_rel == 0:
            skipped += 1
            continue
        hit_pos = np.flatnonzero(hits)
        first_hit_ranks.append(hit_pos[0])
        ranks = hit_pos + 1
        aps.append(float((np.arange(1, n_rel + 1) / ranks).mean()))

    scored = len(aps)
    cmc = np.zeros(n, dtype=np.float64)
    if scored:
        counts = np.bincount(first_hit_ranks, minlength=n)
        cmc = np.cumsum(counts) / scored
    mean_map = float(np.mean(aps)) if scored else 0.0
    stage_matrix = np.array([r.stage_times for r in results], dtype=np.float64)
    return EvalOutcome(
        rank1=float(cmc[0]) if n else 0.0,
        cmc_curve=cmc,
        map=mean_map,
        mean_query_time=float(np.mean([r.total_time for r in results])) if results else 0.0,
        per_stage_mean_times=list(stage_matrix.mean(axis=0)) if results else [],
        n_queries_scored=scored,
        n_queries_skipped=skipped,
        gallery_size=n,
    )


def outcome_report(
    outcome: EvalOutcome,
    lengths=None,
    thresholds=None,
    beta=None,
    cmc_topk: int = 100,
) -> dict:
    """JSON-ready report; the CMC curve is truncated to its first cmc_topk ranks."""
    return {
        "rank1": outcome.rank1,
        "cmc": list(outcome.cmc_curve[:cmc_topk]),
        "map": outcome.map,
        "mean_query_time_s": outcome.mean_query_time,
        "per_stage": list(outcome.per_stage_mean_times),
        "gallery_size": outcome.gallery_size,
        "queries_scored": outcome.n_queries_scored,
        "queries_skipped": outcome.n_queries_skipped,
        "lengths": list(lengths) if lengths is not None else None,
        "thresholds": list(thresholds) if thresholds is not None else None,
        "beta": beta,
    }
