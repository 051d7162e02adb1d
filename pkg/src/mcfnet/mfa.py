"""Adaptive multi-set loss aggregation over prediction-head subsets.

All non-empty subsets of the per-scale prediction maps are enumerated and
partitioned by cardinality into sets S1..Sn (15 subsets in four sets for the
standard four heads). Each set contributes the summed loss of its subset
mixtures; the per-set losses combine through positive weights W1..Wn that
adapt at epoch boundaries from the epoch-mean set losses. The weights carry
no sum-to-one constraint, only equal initialization; the update policy
redistributes the existing total weight mass via a softmax over loss
z-scores and an EMA step, so the mass is preserved and every weight stays
positive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import torch
from torch import Tensor

TAU_FLOOR = 0.05

POLICIES = ("inverse_loss", "focus_hard")


@dataclass(frozen=True)
class SubsetSets:
    """Non-empty head-index subsets grouped by cardinality (1-based groups)."""

    n_heads: int
    by_size: tuple[tuple[tuple[int, ...], ...], ...]  # by_size[k-1] = size-k subsets

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(group) for group in self.by_size)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def all_subsets(self) -> list[tuple[int, ...]]:
        return [s for group in self.by_size for s in group]


def enumerate_subsets(n_heads: int) -> SubsetSets:
    """All non-empty subsets of head indices 0..n_heads-1, lexicographic."""
    if n_heads < 1:
        raise ValueError("n_heads must be at least 1")
    by_size = tuple(
        tuple(itertools.combinations(range(n_heads), k))
        for k in range(1, n_heads + 1)
    )
    return SubsetSets(n_heads=n_heads, by_size=by_size)


def subset_prediction(subset: Sequence[int], maps: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of the selected prediction maps."""
    if len(subset) == 0:
        raise ValueError("subset must be non-empty")
    out = maps[subset[0]]
    for i in subset[1:]:
        out = out + maps[i]
    return out


def set_loss(
    subsets: Sequence[Sequence[int]],
    maps: Sequence[Tensor],
    target: Tensor,
    base_loss: Callable[[Tensor, Tensor], Tensor],
    reduction: str = "sum",
) -> Tensor:
    """Total (or mean) base loss over one cardinality set's subset mixtures."""
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    losses = [base_loss(subset_prediction(s, maps), target) for s in subsets]
    total = torch.stack(losses).sum()
    if reduction == "mean":
        total = total / len(losses)
    return total


@dataclass(frozen=True)
class MfaWeightState:
    """Positive per-set weights plus the update-policy knobs."""

    weights: tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    policy: str = "inverse_loss"
    rho: float = 0.1
    tau: float = 1.0

    def __post_init__(self) -> None:
        if any(w <= 0 for w in self.weights):
            raise ValueError(f"weights must stay positive, got {self.weights}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must be in (0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


def total_loss(set_losses: Sequence[Tensor], state: MfaWeightState) -> Tensor:
    """Weighted sum of per-set losses; weights are constants within a step."""
    if len(set_losses) != len(state.weights):
        raise ValueError(
            f"{len(set_losses)} set losses for {len(state.weights)} weights"
        )
    for loss in set_losses:
        if not torch.isfinite(loss).all():
            raise ValueError("non-finite set loss")
    return sum(w * loss for w, loss in zip(state.weights, set_losses))


def update_weights(state: MfaWeightState, mean_set_losses: Sequence[float]) -> MfaWeightState:
    """Epoch-boundary weight update.

    Standardizes the epoch-mean set losses (population std; zero scores when
    all are equal), converts them to a softmax target over the temperature
    (down-weighting high-loss sets under the default policy, the reverse for
    'focus_hard'), rescales the target to the current total weight mass, and
    moves the weights toward it by the EMA rate.
    """
    losses = [float(v) for v in mean_set_losses]
    if len(losses) != len(state.weights):
        raise ValueError(f"{len(losses)} losses for {len(state.weights)} weights")
    if not all(math.isfinite(v) for v in losses):
        raise ValueError(f"non-finite epoch losses: {losses}")

    n = len(losses)
    mean = sum(losses) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in losses) / n)
    z = [0.0 if std == 0.0 else (v - mean) / std for v in losses]

    tau = max(state.tau, TAU_FLOOR)
    sign = -1.0 if state.policy == "inverse_loss" else 1.0
    scores = [sign * zi / tau for zi in z]
    top = max(scores)
    exps = [math.exp(s - top) for s in scores]
    norm = sum(exps)
    w_total = sum(state.weights)
    target = [w_total * e / norm for e in exps]

    new = tuple(
        (1.0 - state.rho) * w + state.rho * t for w, t in zip(state.weights, target)
    )
    return replace(state, weights=new)
