"""Shared fixtures: a small dataset for unit tests and FD-gradient helpers."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from codepyramid import PyramidConfig, ToySplit, generate_dataset


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    """Small family dataset: 8 families x 4 ids, enough for every unit test."""
    root = tmp_path_factory.mktemp("toydata")
    n_ids = generate_dataset(root, n_families=8, ids_per_family=4, seed=0)
    assert n_ids == 32
    return root


@pytest.fixture(scope="session")
def toy_splits(toy_root):
    return {split: ToySplit(toy_root, split) for split in ("train", "gallery", "query")}


@pytest.fixture
def small_cfg():
    return PyramidConfig(lengths=(16, 32), n_classes=32, backbone_dim=64)


def finite_difference_check(loss_fn, tensors, rel_tol=1e-4, eps=1e-5, probes=6, seed=0):
    """Compare autograd gradients of loss_fn(tensors) against central differences.

    Probes a fixed random subset of coordinates per tensor; every probed
    coordinate must match within rel_tol relative (or 1e-8 absolute near
    zero). Tensors without a gradient are skipped: detached teacher inputs
    influence the loss value but by construction own no gradient path.
    """
    tensors = [t.detach().double().requires_grad_(True) for t in tensors]
    loss = loss_fn(tensors)
    loss.backward()
    assert any(t.grad is not None for t in tensors)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for tensor in tensors:
        if tensor.grad is None:
            continue
        flat = tensor.detach().reshape(-1)
        grad = tensor.grad.reshape(-1)
        for idx in rng.choice(flat.numel(), size=min(probes, flat.numel()), replace=False):
            original = flat[idx].item()
            flat[idx] = original + eps
            up = loss_fn(tensors).item()
            flat[idx] = original - eps
            down = loss_fn(tensors).item()
            flat[idx] = original
            numeric = (up - down) / (2 * eps)
            analytic = grad[idx].item()
            scale = max(abs(numeric), abs(analytic), 1e-8 / rel_tol)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst
