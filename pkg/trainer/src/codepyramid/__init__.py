"""Toy-scale trainer for multi-length binary codes.

A single network learns codes at several lengths through a chain of heads
built longest-first; shorter codes mimic longer ones through softened-logit
and pairwise-similarity distillation. Trained codes export into the
retrieval engine's codebook container.
"""

from .config import PyramidConfig, TrainConfig
from .data import PKSampler, ToySplit, generate_dataset
from .evaluate import hamming_matrix, rank1_and_map
from .export import export_codes, extract_codes, pack_sign_codes, write_codebook
from .losses import (
    batch_hard_triplet_loss,
    probability_distillation_loss,
    similarity_distillation_loss,
    total_loss,
)
from .model import CodeBatch, CodePyramid, SingleHead, quantize
from .train import build_model, fit

__version__ = "0.1.0"
