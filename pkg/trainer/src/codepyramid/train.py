"""Training loop: PK batches, Adam with warm-up and step decay, metrics CSV."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import torch

from .config import PyramidConfig, TrainConfig
from .data import PKSampler, ToySplit
from .losses import total_loss
from .model import CodePyramid, SingleHead


def build_model(cfg: PyramidConfig, variant: str = "pyramid", seed: int = 0) -> torch.nn.Module:
    torch.manual_seed(seed)
    if variant == "pyramid":
        return CodePyramid(cfg)
    if variant.startswith("single"):
        length = int(variant.removeprefix("single"))
        single_cfg = PyramidConfig(
            lengths=(length,),
            n_classes=cfg.n_classes,
            backbone_dim=cfg.backbone_dim,
            triplet_margin=cfg.triplet_margin,
            ids_per_batch=cfg.ids_per_batch,
            images_per_id=cfg.images_per_id,
        )
        return SingleHead(single_cfg, length)
    raise ValueError(f"unknown variant {variant!r}")


def fit(
    model: torch.nn.Module,
    train_split: ToySplit,
    cfg: PyramidConfig,
    tcfg: TrainConfig,
    metrics_csv=None,
) -> list[dict]:
    """Train in place; returns per-step metric rows (also written as CSV)."""
    torch.manual_seed(tcfg.seed)
    sampler = PKSampler(train_split.person_ids, cfg.ids_per_batch, cfg.images_per_id, seed=tcfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=tcfg.lr)
    labels_all = torch.from_numpy(train_split.person_ids)
    steps_per_epoch = max(1, math.ceil(len(train_split) / cfg.batch_size))

    history: list[dict] = []
    step = 0
    model.train()
    for epoch in range(tcfg.epochs):
        lr = tcfg.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        for _ in range(steps_per_epoch):
            picks = sampler.batch()
            images = train_split.tensor[picks]
            labels = labels_all[picks]
            out = model(images)
            terms = total_loss(out, labels, cfg)
            optimizer.zero_grad()
            terms["total"].backward()
            optimizer.step()
            step += 1
            history.append(
                {
                    "step": step,
                    "epoch": epoch,
                    "lr": lr,
                    **{name: float(value.detach()) for name, value in terms.items()},
                }
            )

    if metrics_csv is not None:
        path = Path(metrics_csv)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(history[0].keys()))
            writer.writeheader()
            writer.writerows(history)
    return history
