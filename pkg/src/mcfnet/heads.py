"""Per-scale prediction heads and their aggregation into the final map.

Each decoder stage gets a small conv head producing class logits. In cascade
mode the two backbones' heads are merged pairwise per scale (the smaller map
is resized onto the other), and the four per-scale maps combine linearly
into the final prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from torch import Tensor, nn

from .resize import bilinear_resize


@dataclass
class FinalWeights:
    """Scalar coefficients of the four per-scale maps; all 1 by default."""

    u: float = 1.0
    v: float = 1.0
    w: float = 1.0
    x: float = 1.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(c) for c in self.as_tuple()):
            raise ValueError(f"final weights must be finite, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.u, self.v, self.w, self.x)


class PredictionHeads(nn.Module):
    """Four conv heads over finest-first decoder features (64, 64, 128, 256)."""

    def __init__(
        self,
        in_channels: Sequence[int],
        n_classes: int,
        kernel_size: int = 1,
    ) -> None:
        super().__init__()
        if len(in_channels) != 4:
            raise ValueError(f"expected 4 head input channel counts, got {in_channels}")
        self.in_channels = tuple(in_channels)
        self.n_classes = n_classes
        self.heads = nn.ModuleList(
            nn.Conv2d(c, n_classes, kernel_size, padding=kernel_size // 2)
            for c in in_channels
        )

    def forward(self, features: Sequence[Tensor]) -> list[Tensor]:
        maps = []
        for head, expect, f in zip(self.heads, self.in_channels, features):
            if f.shape[1] != expect:
                raise ValueError(f"head expected {expect} channels, got {f.shape[1]}")
            maps.append(head(f))
        return maps


def pairwise_aggregate(seb_map: Tensor, fcb_map: Tensor) -> Tensor:
    """Merge same-scale prediction maps: resize the first onto the second, add."""
    if seb_map.shape[1] != fcb_map.shape[1]:
        raise ValueError(
            f"class-count mismatch: {seb_map.shape[1]} vs {fcb_map.shape[1]}"
        )
    if seb_map.shape[0] != fcb_map.shape[0]:
        raise ValueError("batch mismatch between prediction maps")
    return bilinear_resize(seb_map, fcb_map.shape[-2:]) + fcb_map


def final_pred(maps: Sequence[Tensor], weights: FinalWeights | None = None) -> Tensor:
    """Weighted sum of the four per-scale maps (all already at one size)."""
    weights = weights or FinalWeights()
    if len(maps) != 4:
        raise ValueError(f"expected 4 prediction maps, got {len(maps)}")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"prediction map shapes differ: {m.shape} vs {shape}")
    u, v, w, x = weights.as_tuple()
    return u * maps[0] + v * maps[1] + w * maps[2] + x * maps[3]
