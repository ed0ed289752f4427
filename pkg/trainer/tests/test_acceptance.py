"""Acceptance suite for the trainer: one printed line per criterion.

Run with `pytest tests/test_acceptance.py -v -s`. The directional experiment
trains both model variants from three seeds on the family-structured toy
dataset and takes about six minutes on CPU.
"""

import json
import subprocess

import numpy as np
import pytest
import torch

from codepyramid import (
    PyramidConfig,
    ToySplit,
    TrainConfig,
    build_model,
    export_codes,
    extract_codes,
    fit,
    generate_dataset,
    probability_distillation_loss,
    rank1_and_map,
    similarity_distillation_loss,
)
from conftest import finite_difference_check

LENGTHS = (32, 128, 512)
N_IDS = 240


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def bench_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench_data")
    n_ids = generate_dataset(root, seed=0)  # 30 families x 8 ids, defaults
    assert n_ids == N_IDS
    return {
        "root": root,
        "train": ToySplit(root, "train"),
        "gallery": ToySplit(root, "gallery"),
        "query": ToySplit(root, "query"),
    }


def _train(data, variant: str, seed: int):
    cfg = PyramidConfig(lengths=LENGTHS, n_classes=N_IDS)
    model = build_model(cfg, variant, seed=seed)
    run_cfg = cfg if variant == "pyramid" else PyramidConfig(lengths=(32,), n_classes=N_IDS)
    fit(model, data["train"], run_cfg, TrainConfig(seed=seed))
    return model


def _rank1_per_level(model, data):
    gallery_codes = extract_codes(model, data["gallery"])
    query_codes = extract_codes(model, data["query"])
    out = []
    for g, q in zip(gallery_codes, query_codes):
        r1, _ = rank1_and_map(
            q, data["query"].person_ids, data["query"].camera_ids,
            g, data["gallery"].person_ids, data["gallery"].camera_ids,
        )
        out.append(r1)
    return out


@pytest.fixture(scope="module")
def trained_pyramid(bench_data):
    return _train(bench_data, "pyramid", seed=0)


def test_01_distillation_gradients():
    """Autograd gradients of both distillation losses match finite differences."""
    torch.manual_seed(11)
    logits = [torch.randn(4, 6) for _ in range(3)]
    worst_prob = finite_difference_check(
        lambda ts: probability_distillation_loss(list(ts), temperature=1.0), logits
    )
    codes = [0.8 * torch.tanh(torch.randn(4, 8)), 0.8 * torch.tanh(torch.randn(4, 16)),
             0.8 * torch.tanh(torch.randn(4, 32))]
    worst_sim = finite_difference_check(
        lambda ts: similarity_distillation_loss(list(ts), (8, 16, 32)), codes
    )
    ok = worst_prob < 1e-4 and worst_sim < 1e-4
    _report("distillation-gradients", ok,
            f"max relative FD error: prob {worst_prob:.2e}, sim {worst_sim:.2e} (tol 1e-4)")


def test_02_directional_effect(bench_data, trained_pyramid):
    """Pyramid + self-distillation beats the independent 32-bit model by >= 5 points."""
    gaps = []
    pyramid_r1s, baseline_r1s = [], []
    for seed in (0, 1, 2):
        pyramid = trained_pyramid if seed == 0 else _train(bench_data, "pyramid", seed)
        r1_pyramid = _rank1_per_level(pyramid, bench_data)[0]
        baseline = _train(bench_data, "single32", seed)
        r1_baseline = _rank1_per_level(baseline, bench_data)[0]
        pyramid_r1s.append(r1_pyramid)
        baseline_r1s.append(r1_baseline)
        gaps.append(100 * (r1_pyramid - r1_baseline))
    mean_gap = float(np.mean(gaps))
    detail = (
        f"32-bit rank1 pyramid {[f'{r:.3f}' for r in pyramid_r1s]} vs "
        f"baseline {[f'{r:.3f}' for r in baseline_r1s]}; "
        f"gaps {[f'{g:+.1f}' for g in gaps]} -> mean {mean_gap:+.1f}pt (floor +5)"
    )
    _report("directional-aio-effect", mean_gap >= 5.0, detail)


def test_03_boundary_integrity(bench_data, trained_pyramid, tmp_path):
    """Exported codebooks load in the engine and reproduce the trainer's rank-1."""
    gallery_path = tmp_path / "gallery.ctfc"
    queries_path = tmp_path / "queries.ctfc"
    export_codes(trained_pyramid, bench_data["gallery"], gallery_path)
    export_codes(trained_pyramid, bench_data["query"], queries_path)
    trainer_r1 = _rank1_per_level(trained_pyramid, bench_data)

    ok = True
    details = []
    for level in (1, len(LENGTHS)):
        rankings = tmp_path / f"rank_{level}.npz"
        metrics = tmp_path / f"metrics_{level}.json"
        search = subprocess.run(
            ["codecascade", "search", "--codebook", str(gallery_path),
             "--queries", str(queries_path), "--level", str(level),
             "--out", str(rankings)],
            capture_output=True, text=True,
        )
        ok &= search.returncode == 0
        evaluate = subprocess.run(
            ["codecascade", "eval", "--rankings", str(rankings),
             "--codebook", str(gallery_path), "--queries", str(queries_path),
             "--out", str(metrics)],
            capture_output=True, text=True,
        )
        ok &= evaluate.returncode == 0
        if not ok:
            details.append(search.stderr + evaluate.stderr)
            break
        engine_r1 = json.loads(metrics.read_text())["rank1"]
        gap = abs(engine_r1 - trainer_r1[level - 1]) * 100
        ok &= gap <= 0.5
        details.append(
            f"level {level}: engine {engine_r1:.3f} vs trainer {trainer_r1[level - 1]:.3f} "
            f"(gap {gap:.2f}pt)"
        )
    _report("boundary-integrity", ok, "; ".join(details))


def test_04_training_loss_decreases(bench_data):
    """Fixed-seed toy run: total loss drops by >= 20% from step 10 to step 200."""
    cfg = PyramidConfig(lengths=LENGTHS, n_classes=N_IDS)
    model = build_model(cfg, "pyramid", seed=5)
    history = fit(model, bench_data["train"], cfg, TrainConfig(epochs=7, seed=5))
    assert len(history) >= 200
    early = history[9]["total"]
    late = history[199]["total"]
    ok = late <= 0.8 * early
    _report("loss-decrease", ok,
            f"step 10 total {early:.2f} -> step 200 total {late:.2f} "
            f"({100 * (1 - late / early):.0f}% drop, floor 20%)")
