"""Trainer-side retrieval check on hard codes, no engine code involved.

Distances are plain differing-bit counts over {-1,+1} codes, rankings break
ties by gallery index, and gallery items sharing both the person and the
camera with the query are dropped before scoring (the standard protocol).
"""

from __future__ import annotations

import numpy as np


def hamming_matrix(query_codes: np.ndarray, gallery_codes: np.ndarray) -> np.ndarray:
    """(n_q, n_g) differing-bit counts between {-1,+1} code matrices."""
    inner = query_codes.astype(np.int32) @ gallery_codes.astype(np.int32).T
    return (query_codes.shape[1] - inner) // 2


def rank1_and_map(
    query_codes: np.ndarray,
    query_ids: np.ndarray,
    query_cams: np.ndarray,
    gallery_codes: np.ndarray,
    gallery_ids: np.ndarray,
    gallery_cams: np.ndarray,
) -> tuple[float, float]:
    dists = hamming_matrix(query_codes, gallery_codes)
    hits_at_1, aps = [], []
    for qi in range(len(query_ids)):
        keep = ~((gallery_ids == query_ids[qi]) & (gallery_cams == query_cams[qi]))
        order = np.argsort(dists[qi][keep], kind="stable")
        rel = (gallery_ids[keep] == query_ids[qi])[order]
        n_rel = int(rel.sum())
        if n_rel == 0:
            continue
        hits_at_1.append(bool(rel[0]))
        ranks = np.flatnonzero(rel) + 1
        aps.append(float((np.arange(1, n_rel + 1) / ranks).mean()))
    if not aps:
        raise ValueError("no query had a valid cross-camera match")
    return float(np.mean(hits_at_1)), float(np.mean(aps))
