"""Objective terms: supervision, batch-hard triplet, and self-distillation.

Both distillation terms run over adjacent level pairs and treat the longer
code as a frozen teacher: its softmax (probability term) or its pairwise
similarity matrix (similarity term) is detached, so the teacher's own head
receives no gradient from distillation. Levels are indexed ascending here,
so the teacher of pair k is level k+1.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .config import PyramidConfig
from .model import CodeBatch


def probability_distillation_loss(logits: list[torch.Tensor], temperature: float = 1.0) -> torch.Tensor:
    """Softened cross-entropy of each shorter level against the next longer one."""
    if len(logits) < 2:
        raise ValueError("probability distillation needs at least two levels")
    total = logits[0].new_zeros(())
    for k in range(len(logits) - 1):
        student = F.log_softmax(logits[k] / temperature, dim=1)
        teacher = F.softmax(logits[k + 1].detach() / temperature, dim=1)
        total = total + (-(teacher * student).sum(dim=1)).mean()
    return total / (len(logits) - 1)


def _pair_distance_matrix(codes: torch.Tensor, length: int) -> torch.Tensor:
    """Inner-product form of the Hamming distance, exact on hard codes."""
    return (length - codes @ codes.T) / 2.0


def similarity_distillation_loss(relaxed: list[torch.Tensor], lengths) -> torch.Tensor:
    """Squared mismatch of length-normalized pair-distance matrices, summed
    over all ordered sample pairs and averaged over adjacent level pairs."""
    if len(relaxed) < 2:
        raise ValueError("similarity distillation needs at least two levels")
    if relaxed[0].shape[0] < 2:
        raise ValueError("similarity distillation needs a batch of at least 2")
    total = relaxed[0].new_zeros(())
    for k in range(len(relaxed) - 1):
        student = _pair_distance_matrix(relaxed[k], lengths[k]) / lengths[k]
        teacher = _pair_distance_matrix(relaxed[k + 1], lengths[k + 1]).detach() / lengths[k + 1]
        total = total + ((teacher - student) ** 2).sum()
    return total / (len(relaxed) - 1)


def batch_hard_triplet_loss(codes: torch.Tensor, labels: torch.Tensor, margin: float) -> torch.Tensor:
    """Hardest-positive/hardest-negative hinge over one embedding batch."""
    dist = torch.cdist(codes, codes)
    same = labels[:, None] == labels[None, :]
    eye = torch.eye(len(labels), dtype=torch.bool, device=codes.device)
    pos_mask = same & ~eye
    neg_mask = ~same
    if not pos_mask.any() or not neg_mask.any():
        raise ValueError("triplet loss needs at least two ids with repeats in the batch")
    hardest_pos = torch.where(pos_mask, dist, dist.new_tensor(-torch.inf)).amax(dim=1)
    hardest_neg = torch.where(neg_mask, dist, dist.new_tensor(torch.inf)).amin(dim=1)
    return F.relu(hardest_pos - hardest_neg + margin).mean()


def total_loss(batch: CodeBatch, labels: torch.Tensor, cfg: PyramidConfig) -> dict[str, torch.Tensor]:
    """Weighted objective; classification and triplet sum over all levels.

    The similarity weight applies to the per-ordered-pair mean of the
    pair-sum loss: with the raw sum, a 64-image batch multiplies the term by
    another ~4e3 on top of lambda_sim and the distillation gradient drowns
    the supervision losses entirely.
    """
    ce = torch.stack([F.cross_entropy(z, labels) for z in batch.logits]).sum()
    tri = torch.stack([
        batch_hard_triplet_loss(c, labels, cfg.triplet_margin) for c in batch.relaxed
    ]).sum()
    terms = {"ce": ce, "triplet": tri}
    if len(batch.logits) >= 2:
        terms["prob"] = probability_distillation_loss(batch.logits, cfg.temperature)
        terms["sim"] = similarity_distillation_loss(batch.relaxed, cfg.lengths)
        n_pairs = batch.relaxed[0].shape[0] ** 2
        total = (
            ce
            + tri
            + cfg.lambda_prob * terms["prob"]
            + cfg.lambda_sim * terms["sim"] / n_pairs
        )
    else:
        total = ce + tri
    terms["total"] = total
    return terms
