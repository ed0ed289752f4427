"""Benchmark harness: sort scaling, distance kernels, gallery scaling, beta sweep.

Timing rules shared by every experiment: monotonic clock, single worker, a
warm-up pass that is discarded, and per-query times that cover distance
computation and sorting only. Records carry their full parameter set so any
row can be reproduced from the CSV alone.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import FBetaConfig, fit_pair_models, thresholds_from_models
from .cascade import QueryCodes, RankedResult, ctf_search, full_rank
from .codebook import CodeLengthSchedule, MultiLevelCodebook, ThresholdSet, words_per_row
from .evaluation import evaluate
from .hamming import DistanceVector, batch_distances, batch_euclidean_distances, counting_sort_rank
from .synth import SynthSpec, generate

DEFAULT_LENGTHS = (32, 128, 512, 2048)
DEFAULT_FLIP_PROBS = (0.08, 0.08, 0.06, 0.05)
#: noisier coarse level for the beta sweep so candidate counts and query
#: times vary visibly across the beta range
BETA_SWEEP_FLIP_PROBS = (0.15, 0.10, 0.07, 0.05)
DEFAULT_ITEMS_PER_ID = 50
DEFAULT_MAX_GALLERY_BYTES = 2 << 30
WARMUP_QUERIES = 10
MIN_TIMED_QUERIES = 100


@dataclass
class BenchmarkRecord:
    experiment: str
    metric: str
    value: float
    units: str
    params: dict


def write_records_csv(records: list[BenchmarkRecord], path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["experiment", "metric", "value", "units", "params"])
        writer.writeheader()
        for r in records:
            writer.writerow(
                {
                    "experiment": r.experiment,
                    "metric": r.metric,
                    "value": repr(r.value),
                    "units": r.units,
                    "params": json.dumps(r.params, sort_keys=True),
                }
            )


def _timeit(fn, reps: int, warmup: int = 2) -> float:
    """Median time per call over reps, warm-up discarded.

    The median rejects the occasional rep inflated by scheduler or memory
    bandwidth contention, which otherwise dominates at large input sizes.
    """
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def packed_gallery_bytes(n_items: int, lengths) -> int:
    return n_items * sum(words_per_row(l) * 8 for l in lengths)


def check_gallery_budget(n_items: int, lengths, max_bytes: int) -> None:
    need = packed_gallery_bytes(n_items, lengths)
    if need > max_bytes:
        raise MemoryError(
            f"gallery of {n_items} items needs {need} packed bytes, over the {max_bytes} cap"
        )


def sort_scaling(
    sizes=(10_000, 100_000, 1_000_000),
    level_length: int = 2048,
    seed: int = 20,
    reps: int | None = None,
) -> list[BenchmarkRecord]:
    """Counting sort vs comparison quick-sort over growing gallery sizes."""
    rng = np.random.default_rng(seed)
    records = []
    for n in sizes:
        n = int(n)
        r = reps or max(7, 5_000_000 // n)
        dists = rng.integers(0, level_length + 1, size=n).astype(np.int32)
        dv = DistanceVector(dists, level_length)
        t_count = _timeit(lambda: counting_sort_rank(dv), r)
        real_dists = rng.random(n)
        t_quick = _timeit(lambda: np.argsort(real_dists, kind="quicksort"), r)
        base = {"n_items": n, "level_length": level_length, "reps": r, "seed": seed}
        records.append(
            BenchmarkRecord("sort-scaling", "mean_sort_time", t_count, "s",
                            {**base, "algorithm": "counting-sort"})
        )
        records.append(
            BenchmarkRecord("sort-scaling", "mean_sort_time", t_quick, "s",
                            {**base, "algorithm": "quick-sort"})
        )
    return records


def distance_kernels(
    lengths=(32, 64, 128, 256, 512, 1024, 2048),
    hamming_pairs: int = 65_536,
    euclidean_pairs: int = 8_192,
    seed: int = 20,
    reps: int = 5,
) -> list[BenchmarkRecord]:
    """Per-pair cost of packed Hamming vs double-precision Euclidean distance.

    Per-pair times are amortized over a one-query-versus-gallery batch, which
    is the access pattern every ranking pass actually uses.
    """
    from .codebook import PackedCodeMatrix

    rng = np.random.default_rng(seed)
    records = []
    for length in lengths:
        wpr = words_per_row(length)
        words = rng.integers(0, 1 << 63, size=(hamming_pairs, wpr), dtype=np.uint64)
        if length % 64:
            words[:, -1] &= np.uint64((1 << (length % 64)) - 1)
        gallery = PackedCodeMatrix(words, length)
        q = gallery.row(0).copy()
        t_ham = _timeit(lambda: batch_distances(q, gallery), reps) / hamming_pairs

        real = rng.standard_normal((euclidean_pairs, length))
        q_real = real[0].copy()
        t_euc = _timeit(lambda: batch_euclidean_distances(q_real, real), reps) / euclidean_pairs

        base = {"length": length, "seed": seed, "reps": reps}
        records.append(
            BenchmarkRecord("distance-kernels", "per_pair_time", t_ham, "s",
                            {**base, "algorithm": "hamming", "n_pairs": hamming_pairs})
        )
        records.append(
            BenchmarkRecord("distance-kernels", "per_pair_time", t_euc, "s",
                            {**base, "algorithm": "euclidean", "n_pairs": euclidean_pairs})
        )
        records.append(
            BenchmarkRecord("distance-kernels", "euclidean_over_hamming", t_euc / t_ham,
                            "ratio", base)
        )
    return records


def build_synthetic_benchmark(
    n_items: int,
    lengths=DEFAULT_LENGTHS,
    flip_probs=DEFAULT_FLIP_PROBS,
    items_per_id: int = DEFAULT_ITEMS_PER_ID,
    cams: int = 4,
    seed: int = 20,
) -> tuple[MultiLevelCodebook, MultiLevelCodebook]:
    """Synthetic gallery/query pair with n_items gallery rows."""
    n_ids = max(2, n_items // items_per_id)
    spec = SynthSpec(
        n_ids=n_ids,
        items_per_id=items_per_id,
        cams=cams,
        schedule=CodeLengthSchedule(lengths),
        flip_prob_per_level=tuple(flip_probs),
        seed=seed,
        queries_per_id=1,
    )
    return generate(spec)


def pick_query_indices(n_queries_available: int, n_wanted: int) -> np.ndarray:
    """Deterministic evenly spaced query subset."""
    n = min(n_queries_available, n_wanted)
    return np.unique(np.linspace(0, n_queries_available - 1, n).astype(np.int64))


def run_queries(
    gallery: MultiLevelCodebook,
    queries: MultiLevelCodebook,
    search_fn,
    query_indices: np.ndarray,
    warmup: int = WARMUP_QUERIES,
) -> list[RankedResult]:
    """Run warm-up queries (discarded), then one timed pass, single-threaded."""
    for i in query_indices[:warmup]:
        search_fn(QueryCodes.from_codebook(queries, int(i)), gallery)
    return [
        search_fn(QueryCodes.from_codebook(queries, int(i)), gallery) for i in query_indices
    ]


def timed_search(gallery, queries, search_fn, query_indices, blocks: int = 1):
    """One evaluated pass plus optional repeat timing blocks.

    Each block is a single-threaded mean over the whole query set; the
    reported time is the minimum block mean, which rejects blocks inflated by
    background machine drift. Returns (results, mean_query_time).
    """
    results = run_queries(gallery, queries, search_fn, query_indices)
    best = float(np.mean([r.total_time for r in results]))
    for _ in range(blocks - 1):
        extra = [
            search_fn(QueryCodes.from_codebook(queries, int(i)), gallery)
            for i in query_indices
        ]
        best = min(best, float(np.mean([r.total_time for r in extra])))
    return results, best


def _searched_eval(gallery, queries, search_fn, query_indices, blocks: int = 1):
    results, best_time = timed_search(gallery, queries, search_fn, query_indices, blocks)
    outcome = evaluate(
        results,
        gallery,
        queries.person_ids[query_indices],
        queries.camera_ids[query_indices],
    )
    outcome.mean_query_time = best_time
    return results, outcome


def gallery_scaling(
    sizes=(10_000, 100_000, 1_000_000),
    beta: float = 2.0,
    seed: int = 20,
    n_queries: int = WARMUP_QUERIES + MIN_TIMED_QUERIES,
    max_gallery_bytes: int = DEFAULT_MAX_GALLERY_BYTES,
    lengths=DEFAULT_LENGTHS,
    flip_probs=DEFAULT_FLIP_PROBS,
) -> list[BenchmarkRecord]:
    """Coarse-to-fine vs full fine ranking across gallery sizes."""
    records = []
    for n in sizes:
        n = int(n)
        check_gallery_budget(n, lengths, max_gallery_bytes)
        gallery, queries = build_synthetic_benchmark(n, lengths, flip_probs, seed=seed)
        thresholds = _calibrated(gallery, beta, seed)
        idx = pick_query_indices(queries.n_items, n_queries)
        n_levels = gallery.n_levels

        _, out_full = _searched_eval(
            gallery, queries, lambda q, cb: full_rank(q, cb, n_levels), idx, blocks=2
        )
        _, out_ctf = _searched_eval(
            gallery, queries, lambda q, cb: ctf_search(q, cb, thresholds), idx, blocks=2
        )
        params = {
            "n_items": gallery.n_items, "beta": beta, "seed": seed,
            "lengths": list(lengths), "thresholds": list(thresholds.thresholds),
            "n_queries": len(idx),
        }
        records.extend([
            BenchmarkRecord("gallery-scaling", "mean_query_time_full", out_full.mean_query_time, "s", params),
            BenchmarkRecord("gallery-scaling", "mean_query_time_ctf", out_ctf.mean_query_time, "s", params),
            BenchmarkRecord("gallery-scaling", "speed_ratio",
                            out_full.mean_query_time / out_ctf.mean_query_time, "ratio", params),
            BenchmarkRecord("gallery-scaling", "map_full", out_full.map, "fraction", params),
            BenchmarkRecord("gallery-scaling", "map_ctf", out_ctf.map, "fraction", params),
        ])
    return records


def _calibrated(gallery: MultiLevelCodebook, beta: float, seed: int) -> ThresholdSet:
    models = fit_pair_models(gallery, rng_seed=seed)
    return thresholds_from_models(models, gallery.schedule, FBetaConfig(beta=beta))


def beta_sweep(
    betas=(0.01, 0.1, 1.0, 2.0, 10.0),
    gallery_size: int = 100_000,
    seed: int = 20,
    n_queries: int = WARMUP_QUERIES + MIN_TIMED_QUERIES,
    max_gallery_bytes: int = DEFAULT_MAX_GALLERY_BYTES,
    lengths=DEFAULT_LENGTHS,
    flip_probs=BETA_SWEEP_FLIP_PROBS,
    time_blocks: int = 3,
) -> list[BenchmarkRecord]:
    """Accuracy/speed trade-off as the calibration weight beta grows.

    Pair models are fitted once and shared across betas, so threshold
    differences reflect beta alone.
    """
    check_gallery_budget(gallery_size, lengths, max_gallery_bytes)
    gallery, queries = build_synthetic_benchmark(gallery_size, lengths, flip_probs, seed=seed)
    models = fit_pair_models(gallery, rng_seed=seed)
    idx = pick_query_indices(queries.n_items, n_queries)
    records = []
    for beta in betas:
        thresholds = thresholds_from_models(models, gallery.schedule, FBetaConfig(beta=float(beta)))
        _, outcome = _searched_eval(
            gallery, queries, lambda q, cb: ctf_search(q, cb, thresholds), idx,
            blocks=time_blocks,
        )
        params = {
            "gallery_size": gallery.n_items, "beta": float(beta), "seed": seed,
            "lengths": list(lengths), "thresholds": list(thresholds.thresholds),
            "n_queries": len(idx),
        }
        records.extend([
            BenchmarkRecord("beta-sweep", "mean_query_time", outcome.mean_query_time, "s", params),
            BenchmarkRecord("beta-sweep", "map", outcome.map, "fraction", params),
            BenchmarkRecord("beta-sweep", "rank1", outcome.rank1, "fraction", params),
        ])
    return records
