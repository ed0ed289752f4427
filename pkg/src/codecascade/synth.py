"""Synthetic multi-level galleries with controlled identity structure.

Each identity gets a uniformly random prototype code at the longest level;
shorter-level prototypes reuse a fixed random subset of those bits, so levels
stay coupled the way a single multi-head encoder would couple them. Item codes
flip each prototype bit independently with a per-level probability p_k.

Closed-form consequences used by the test oracles: a same-id pair differs in a
bit iff exactly one of the two flips hit it, so its distance at level k is
Binomial(l_k, 2 p_k (1 - p_k)); different-id prototypes are independent and
uniform, so their distance is Binomial(l_k, 1/2) regardless of p_k. Choosing
smaller p_k for longer levels makes longer codes strictly more informative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import (
    CodeLengthSchedule,
    MultiLevelCodebook,
    PackedCodeMatrix,
    pack_codes,
    words_per_row,
)


@dataclass(frozen=True)
class SynthSpec:
    n_ids: int
    items_per_id: int
    cams: int
    schedule: CodeLengthSchedule
    flip_prob_per_level: tuple[float, ...]
    seed: int
    queries_per_id: int = 1

    def __post_init__(self):
        if self.n_ids < 2:
            raise ValueError(f"need at least 2 identities, got {self.n_ids}")
        if self.items_per_id < 1:
            raise ValueError("need at least one gallery item per id")
        if self.cams < 1:
            raise ValueError("need at least one camera")
        if self.queries_per_id < 0:
            raise ValueError("queries_per_id must be non-negative")
        if len(self.flip_prob_per_level) != self.schedule.n_levels:
            raise ValueError(
                f"{len(self.flip_prob_per_level)} flip probabilities for "
                f"{self.schedule.n_levels} levels"
            )
        for p in self.flip_prob_per_level:
            if not 0.0 <= p < 0.5:
                raise ValueError(f"flip probability {p} outside [0, 0.5)")


def generate(spec: SynthSpec) -> tuple[MultiLevelCodebook, MultiLevelCodebook]:
    """Deterministically build (gallery, queries) codebooks from the spec."""
    schedule = spec.schedule
    n_levels = schedule.n_levels
    longest = schedule.lengths[-1]

    root = np.random.SeedSequence(spec.seed)
    proto_seq, items_seq = root.spawn(2)
    proto_rng = np.random.default_rng(proto_seq)

    prototypes_top = proto_rng.integers(0, 2, size=(spec.n_ids, longest), dtype=np.uint8)
    bit_subsets = [
        np.sort(proto_rng.choice(longest, size=l, replace=False))
        for l in schedule.lengths[:-1]
    ]
    prototypes = [prototypes_top[:, sub] for sub in bit_subsets] + [prototypes_top]

    n_gal = spec.n_ids * spec.items_per_id
    n_qry = spec.n_ids * spec.queries_per_id
    gal_words = [
        np.zeros((n_gal, words_per_row(l)), dtype=np.uint64) for l in schedule.lengths
    ]
    qry_words = [
        np.zeros((n_qry, words_per_row(l)), dtype=np.uint64) for l in schedule.lengths
    ]

    per_id = spec.items_per_id + spec.queries_per_id
    id_seqs = items_seq.spawn(spec.n_ids)
    for i in range(spec.n_ids):
        rng = np.random.default_rng(id_seqs[i])
        for k in range(n_levels):
            l = schedule.lengths[k]
            p = spec.flip_prob_per_level[k]
            flips = (rng.random((per_id, l)) < p).astype(np.uint8)
            bits = np.bitwise_xor(prototypes[k][i], flips)
            packed = pack_codes(bits, l).words
            g0 = i * spec.items_per_id
            gal_words[k][g0 : g0 + spec.items_per_id] = packed[: spec.items_per_id]
            if spec.queries_per_id:
                q0 = i * spec.queries_per_id
                qry_words[k][q0 : q0 + spec.queries_per_id] = packed[spec.items_per_id :]

    ids = np.repeat(np.arange(spec.n_ids, dtype=np.uint32), spec.items_per_id)
    cams = np.tile(np.arange(spec.items_per_id) % spec.cams, spec.n_ids).astype(np.uint16)
    qids = np.repeat(np.arange(spec.n_ids, dtype=np.uint32), spec.queries_per_id)
    # query cameras continue each id's round-robin past its gallery items
    qcams = np.tile(
        (spec.items_per_id + np.arange(spec.queries_per_id)) % spec.cams, spec.n_ids
    ).astype(np.uint16)

    gallery = MultiLevelCodebook(
        schedule,
        [PackedCodeMatrix(w, l) for w, l in zip(gal_words, schedule)],
        ids,
        cams,
    )
    queries = MultiLevelCodebook(
        schedule,
        [PackedCodeMatrix(w, l) for w, l in zip(qry_words, schedule)],
        qids,
        qcams,
    )
    return gallery, queries
