"""Training configuration for the code pyramid."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PyramidConfig:
    """Hyperparameters of the multi-length code model and its losses.

    `lengths` is given ascending (engine order); the pyramid itself is built
    longest-first so every shorter code hangs off the longer one above it.
    """

    lengths: tuple[int, ...] = (32, 128, 512)
    n_classes: int = 240
    backbone_dim: int = 256
    temperature: float = 1.0
    lambda_prob: float = 1.0
    lambda_sim: float = 1000.0
    triplet_margin: float = 0.3
    ids_per_batch: int = 16
    images_per_id: int = 4

    def __post_init__(self):
        if len(self.lengths) < 1:
            raise ValueError("need at least one code length")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError(f"lengths {self.lengths} must be strictly increasing")
        if any(l % 8 for l in self.lengths):
            raise ValueError(f"lengths {self.lengths} must be multiples of 8")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def n_levels(self) -> int:
        return len(self.lengths)

    @property
    def batch_size(self) -> int:
        return self.ids_per_batch * self.images_per_id

    @property
    def descending_lengths(self) -> tuple[int, ...]:
        """Construction order: longest code first, shortest last."""
        return tuple(reversed(self.lengths))


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule, scaled down from a 120-epoch recipe.

    The original schedule warms up for 10/120 of training and decays the
    learning rate to 0.1x and 0.01x at 40/120 and 70/120; the same ratios
    are kept here at toy scale.
    """

    epochs: int = 36
    lr: float = 3.5e-4
    warmup_epochs: int = 3
    decay1_epoch: int = 12
    decay2_epoch: int = 21
    seed: int = 0

    def lr_at(self, epoch: int) -> float:
        if epoch < self.warmup_epochs:
            return self.lr * (epoch + 1) / self.warmup_epochs
        if epoch >= self.decay2_epoch:
            return self.lr * 0.01
        if epoch >= self.decay1_epoch:
            return self.lr * 0.1
        return self.lr
