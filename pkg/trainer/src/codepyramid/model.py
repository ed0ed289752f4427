"""Backbone plus a pyramid of code heads of decreasing length.

The backbone feature chains through one fully-connected layer per level,
longest code first, so every shorter code is a function of the longer one
above it. Each level branches into a batch-norm layer whose output is both
quantized into the binary code (sign, with sign(0) -> +1) and classified for
supervision. Training relaxes the sign with tanh.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .config import PyramidConfig


@dataclass
class CodeBatch:
    """Per-level outputs, ordered like the config's ascending lengths."""

    features: list[torch.Tensor]  # pre-quantization, after batch norm
    relaxed: list[torch.Tensor]  # tanh(bn(v)), in (-1, 1)
    hard: list[torch.Tensor]  # sign codes in {-1, +1}
    logits: list[torch.Tensor]


def quantize(features: torch.Tensor) -> torch.Tensor:
    """Sign quantization with the tie rule sign(0) -> +1."""
    return torch.where(features >= 0, 1.0, -1.0)


class SmallBackbone(nn.Module):
    def __init__(self, out_dim: int):
        super().__init__()
        dims = (3, 32, 64, 128, out_dim)
        blocks = []
        for cin, cout in zip(dims, dims[1:]):
            blocks += [
                nn.Conv2d(cin, cout, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            ]
        self.body = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.body(x)).flatten(1)


class CodePyramid(nn.Module):
    def __init__(self, cfg: PyramidConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = SmallBackbone(cfg.backbone_dim)
        chain_dims = (cfg.backbone_dim,) + cfg.descending_lengths
        self.chain = nn.ModuleList(
            nn.Linear(cin, cout) for cin, cout in zip(chain_dims, chain_dims[1:])
        )
        self.norms = nn.ModuleList(nn.BatchNorm1d(l) for l in cfg.descending_lengths)
        self.heads = nn.ModuleList(
            nn.Linear(l, cfg.n_classes) for l in cfg.descending_lengths
        )

    def forward(self, images: torch.Tensor) -> CodeBatch:
        v = self.backbone(images)
        features, relaxed, hard, logits = [], [], [], []
        for fc, bn, head in zip(self.chain, self.norms, self.heads):
            v = fc(v)
            normed = bn(v)
            features.append(normed)
            relaxed.append(torch.tanh(normed))
            hard.append(quantize(normed))
            logits.append(head(normed))
        # construction ran longest-first; report ascending like the config
        return CodeBatch(
            features=features[::-1],
            relaxed=relaxed[::-1],
            hard=hard[::-1],
            logits=logits[::-1],
        )


class SingleHead(nn.Module):
    """Independently trained single-length baseline: one code, no pyramid."""

    def __init__(self, cfg: PyramidConfig, length: int):
        super().__init__()
        self.backbone = SmallBackbone(cfg.backbone_dim)
        self.fc = nn.Linear(cfg.backbone_dim, length)
        self.norm = nn.BatchNorm1d(length)
        self.head = nn.Linear(length, cfg.n_classes)

    def forward(self, images: torch.Tensor) -> CodeBatch:
        normed = self.norm(self.fc(self.backbone(images)))
        return CodeBatch(
            features=[normed],
            relaxed=[torch.tanh(normed)],
            hard=[quantize(normed)],
            logits=[self.head(normed)],
        )
