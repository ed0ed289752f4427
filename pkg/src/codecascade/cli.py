"""Command-line frontend: generate, calibrate, search, evaluate, benchmark.

Exit codes: 0 ok, 1 usage, 2 data/format error, 3 invariant violation.
Every command is deterministic under its --seed flag; timings excepted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .calibration import DEFAULT_MAX_PAIRS, DEFAULT_SEED, FBetaConfig, calibrate
from .cascade import QueryCodes, ctf_search, full_rank
from .codebook import (
    CodebookFormatError,
    CodeLengthSchedule,
    InvariantViolation,
    load_codebook,
    load_thresholds,
    save_codebook,
    save_thresholds,
)
from .evaluation import evaluate, outcome_report
from .synth import SynthSpec, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def build_parser() -> _Parser:
    parser = _Parser(prog="codecascade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate synthetic gallery and query codebooks")
    p.add_argument("--ids", type=int, default=200)
    p.add_argument("--items-per-id", type=int, default=50)
    p.add_argument("--queries-per-id", type=int, default=1)
    p.add_argument("--cams", type=int, default=4)
    p.add_argument("--lengths", type=_ints, default=bench.DEFAULT_LENGTHS)
    p.add_argument("--flip-probs", type=_floats, default=bench.DEFAULT_FLIP_PROBS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="output prefix for .gallery.ctfc/.queries.ctfc")

    p = sub.add_parser("calibrate", help="fit pair models and write stage thresholds")
    p.add_argument("--codebook", required=True)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--formula", choices=("derived", "paper"), default="derived")
    p.add_argument("--max-pairs", type=int, default=DEFAULT_MAX_PAIRS)
    p.add_argument("--class-ratio", type=float, default=None,
                   help="override the sampled non-relevant/relevant ratio (e.g. 1.0)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="rank gallery items for every query")
    p.add_argument("--codebook", required=True)
    p.add_argument("--queries", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--thresholds", help="threshold JSON: run the coarse-to-fine cascade")
    group.add_argument("--level", type=int, help="rank with this single 1-based level instead")
    p.add_argument("--num-queries", type=int, default=0, help="0 means all queries")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="rankings .npz path")

    p = sub.add_parser("eval", help="score a rankings file (CMC, mAP, timings)")
    p.add_argument("--rankings", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--cmc-topk", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run a benchmark family, write CSV records")
    p.add_argument("kind", choices=("sort-scaling", "distance-kernels", "gallery-scaling", "beta-sweep"))
    p.add_argument("--sizes", type=_ints, default=(10_000, 100_000, 1_000_000))
    p.add_argument("--lengths", type=_ints, default=bench.DEFAULT_LENGTHS)
    p.add_argument("--betas", type=_floats, default=(0.01, 0.1, 1.0, 2.0, 10.0))
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--gallery-size", type=int, default=100_000)
    p.add_argument("--num-queries", type=int, default=bench.WARMUP_QUERIES + bench.MIN_TIMED_QUERIES)
    p.add_argument("--max-gallery-bytes", type=int, default=bench.DEFAULT_MAX_GALLERY_BYTES)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    return parser


def _cmd_gen(args) -> int:
    spec = SynthSpec(
        n_ids=args.ids,
        items_per_id=args.items_per_id,
        cams=args.cams,
        schedule=CodeLengthSchedule(args.lengths),
        flip_prob_per_level=args.flip_probs,
        seed=args.seed,
        queries_per_id=args.queries_per_id,
    )
    gallery, queries = generate(spec)
    save_codebook(gallery, f"{args.out}.gallery.ctfc")
    save_codebook(queries, f"{args.out}.queries.ctfc")
    print(f"wrote {args.out}.gallery.ctfc ({gallery.n_items} items) "
          f"and {args.out}.queries.ctfc ({queries.n_items} items)")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cb = load_codebook(args.codebook)
    cfg = FBetaConfig(beta=args.beta, formula_mode=args.formula)
    thresholds = calibrate(cb, cfg, max_pairs=args.max_pairs, rng_seed=args.seed,
                           class_ratio=args.class_ratio)
    save_thresholds(thresholds, args.out)
    print(f"thresholds {list(thresholds.thresholds)} (beta={args.beta}) -> {args.out}")
    return EXIT_OK


def _cmd_search(args) -> int:
    gallery = load_codebook(args.codebook)
    queries = load_codebook(args.queries)
    if args.level is not None:
        if not 1 <= args.level <= gallery.n_levels:
            raise InvariantViolation(f"level {args.level} outside [1, {gallery.n_levels}]")
        search_fn = lambda q, cb: full_rank(q, cb, args.level)
        mode = f"level-{args.level}"
        thresholds = None
    else:
        thresholds = load_thresholds(args.thresholds)
        search_fn = lambda q, cb: ctf_search(q, cb, thresholds)
        mode = "ctf"

    if args.num_queries and args.num_queries < queries.n_items:
        idx = bench.pick_query_indices(queries.n_items, args.num_queries)
    else:
        idx = np.arange(queries.n_items, dtype=np.int64)
    results = bench.run_queries(gallery, queries, search_fn, idx)

    np.savez_compressed(
        args.out,
        order=np.stack([r.order for r in results]).astype(np.int64),
        stage_counts=np.array([r.stage_candidate_counts for r in results], dtype=np.int64),
        stage_times=np.array([r.stage_times for r in results], dtype=np.float64),
        total_times=np.array([r.total_time for r in results], dtype=np.float64),
        query_indices=idx,
        gallery_size=np.int64(gallery.n_items),
        lengths=np.array(gallery.schedule.lengths, dtype=np.int64),
        thresholds=np.array(thresholds.thresholds if thresholds else [], dtype=np.int64),
        beta=np.float64(thresholds.beta if thresholds else np.nan),
        mode=np.str_(mode),
    )
    print(f"searched {len(idx)} queries ({mode}) -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    gallery = load_codebook(args.codebook)
    queries = load_codebook(args.queries)
    try:
        data = np.load(args.rankings, allow_pickle=False)
        order = data["order"]
        idx = data["query_indices"]
    except (OSError, KeyError, ValueError) as e:
        raise CodebookFormatError(f"unreadable rankings file {args.rankings}: {e}") from e
    if int(data["gallery_size"]) != gallery.n_items:
        raise InvariantViolation(
            f"rankings cover {int(data['gallery_size'])} gallery items, "
            f"codebook has {gallery.n_items}"
        )
    from .cascade import RankedResult

    results = [
        RankedResult(
            order=order[i],
            stage_candidate_counts=list(data["stage_counts"][i]),
            stage_times=list(data["stage_times"][i]),
            total_time=float(data["total_times"][i]),
        )
        for i in range(order.shape[0])
    ]
    outcome = evaluate(results, gallery, queries.person_ids[idx], queries.camera_ids[idx])
    beta = float(data["beta"])
    report = outcome_report(
        outcome,
        lengths=[int(x) for x in data["lengths"]],
        thresholds=[int(x) for x in data["thresholds"]] or None,
        beta=None if np.isnan(beta) else beta,
        cmc_topk=args.cmc_topk,
    )
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(f"rank1={report['rank1']:.4f} map={report['map']:.4f} "
          f"mean_query_time={report['mean_query_time_s']:.6f}s -> {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.kind == "sort-scaling":
        records = bench.sort_scaling(sizes=args.sizes, seed=args.seed)
    elif args.kind == "distance-kernels":
        records = bench.distance_kernels(lengths=args.lengths, seed=args.seed)
    elif args.kind == "gallery-scaling":
        records = bench.gallery_scaling(
            sizes=args.sizes, beta=args.beta, seed=args.seed, n_queries=args.num_queries,
            max_gallery_bytes=args.max_gallery_bytes, lengths=args.lengths,
        )
    else:
        records = bench.beta_sweep(
            betas=args.betas, gallery_size=args.gallery_size, seed=args.seed,
            n_queries=args.num_queries, max_gallery_bytes=args.max_gallery_bytes,
            lengths=args.lengths,
        )
    bench.write_records_csv(records, args.out)
    print(f"{len(records)} records -> {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "calibrate": _cmd_calibrate,
    "search": _cmd_search,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as e:
        return int(e.code or 0)
    except CodebookFormatError as e:
        sys.stderr.write(f"data error: {e}\n")
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, MemoryError) as e:
        sys.stderr.write(f"data error: {e}\n")
        return EXIT_DATA
    except InvariantViolation as e:
        sys.stderr.write(f"invariant violation: {e}\n")
        return EXIT_INVARIANT
    except ValueError as e:
        sys.stderr.write(f"invariant violation: {e}\n")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
