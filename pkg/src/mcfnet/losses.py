"""Combined Dice + cross-entropy training loss.

The loss over softmax probabilities P and one-hot targets Y is

    L = 1 - sum_i [ dice_weight * (2*sum_n Y*P + s) / (sum_n Y^2 + sum_n P^2 + s)
                    + (1/N) * sum_n Y * log(clamp(P)) ]

with one term per class i and sums over all N voxels of the batch. With the
default dice_weight of 1/I (I = class count) a perfect prediction scores
exactly zero: the smoothing term s makes empty classes count as perfectly
matched, and the log term vanishes at Y. The cross-entropy part is averaged
over voxels so its magnitude does not grow with resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor
import torch.nn.functional as F


@dataclass
class CombinedLossConfig:
    n_classes: int
    dice_weight: float | None = None  # defaults to 1 / n_classes
    smooth: float = 1e-5
    prob_clamp: float = 1e-8

    def __post_init__(self) -> None:
        if self.n_classes < 1:
            raise ValueError("n_classes must be positive")
        if self.dice_weight is not None and self.dice_weight <= 0:
            raise ValueError("dice_weight must be positive")
        if self.smooth <= 0 or self.prob_clamp <= 0:
            raise ValueError("smooth and prob_clamp must be positive")

    @property
    def effective_dice_weight(self) -> float:
        return self.dice_weight if self.dice_weight is not None else 1.0 / self.n_classes


def one_hot(labels: Tensor, n_classes: int) -> Tensor:
    """(B, H, W) integer labels -> (B, I, H, W) float one-hot."""
    if labels.max() >= n_classes:
        raise ValueError(f"label {int(labels.max())} out of range for {n_classes} classes")
    return F.one_hot(labels.long(), n_classes).permute(0, 3, 1, 2).float()


def dice_ce_loss(probs: Tensor, target: Tensor, cfg: CombinedLossConfig) -> Tensor:
    """Loss over (B, I, H, W) probabilities and a same-shape one-hot target."""
    if probs.shape != target.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs target {target.shape}")
    if probs.shape[1] != cfg.n_classes:
        raise ValueError(f"expected {cfg.n_classes} classes, got {probs.shape[1]}")
    if not torch.isfinite(probs).all():
        raise ValueError("probabilities contain non-finite values")

    dims = (0, 2, 3)  # pool batch and space, keep classes
    s = cfg.smooth
    inter = (target * probs).sum(dim=dims)
    denom = (target**2).sum(dim=dims) + (probs**2).sum(dim=dims)
    dice = (2.0 * inter + s) / (denom + s)

    n_vox = probs.shape[0] * probs.shape[2] * probs.shape[3]
    log_p = torch.log(probs.clamp(min=cfg.prob_clamp))
    ce = (target * log_p).sum(dim=dims) / n_vox

    return 1.0 - (cfg.effective_dice_weight * dice + ce).sum()


def segmentation_loss(logits: Tensor, labels: Tensor, cfg: CombinedLossConfig) -> Tensor:
    """Convenience wrapper: softmax over class logits, one-hot the labels."""
    return dice_ce_loss(torch.softmax(logits, dim=1), one_hot(labels, cfg.n_classes), cfg)
