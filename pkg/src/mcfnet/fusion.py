"""Cascaded skip-connection machinery.

``Lat`` processes each FCB skip: linear down-projection, LayerNorm, a
dual-branch attention (channel attention with spatially-pooled keys plus a
kernelized linear spatial attention), LayerNorm, linear up-projection, all
inside a residual connection, so a zero-weight block is an exact identity.

``Cab`` is the bottleneck bridge: bottleneck tokens cross-attend to pooled
multi-level encoder tokens, again with a residual.

``SkipFusion`` / ``BottleneckFusion`` add resized, 1x1-projected features
from the companion backbone onto the FCB-side operand.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .resize import bilinear_resize


class OpCounter:
    """Accumulates multiply-accumulate counts reported by attention kernels."""

    def __init__(self) -> None:
        self.flops = 0

    def add(self, n: int) -> None:
        self.flops += int(n)


@dataclass
class LatConfig:
    channels: int  # token dim; down-projection maps onto this channel count
    heads: int = 4

    def __post_init__(self) -> None:
        if self.channels % self.heads != 0:
            raise ValueError(f"channels={self.channels} not divisible by heads={self.heads}")


@dataclass
class CabConfig:
    channels: int  # query/key/value dim = bottleneck channels
    skip_channels: tuple[int, ...] = (64, 128, 256, 512)
    heads: int = 4

    def __post_init__(self) -> None:
        if self.channels % self.heads != 0:
            raise ValueError(f"channels={self.channels} not divisible by heads={self.heads}")


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, n, c = x.shape
    return x.view(b, n, heads, c // heads).transpose(1, 2)  # (B, h, N, d)


def _merge_heads(x: Tensor) -> Tensor:
    b, h, n, d = x.shape
    return x.transpose(1, 2).reshape(b, n, h * d)


def kernel_feature_map(x: Tensor) -> Tensor:
    """Positive feature map (elu + 1) for kernelized linear attention."""
    return F.elu(x) + 1.0


def linear_spatial_attention(
    q: Tensor, k: Tensor, v: Tensor, counter: OpCounter | None = None
) -> Tensor:
    """Linear-complexity attention over (B, h, N, d) token tensors.

    Cost is O(N * d^2) rather than O(N^2 * d): keys and values contract to a
    d x d summary first, so doubling N doubles (not quadruples) the work.
    """
    qp = kernel_feature_map(q)
    kp = kernel_feature_map(k)
    b, h, n, d = qp.shape
    kv = torch.einsum("bhnd,bhne->bhde", kp, v)
    out = torch.einsum("bhnd,bhde->bhne", qp, kv)
    z = torch.einsum("bhnd,bhd->bhn", qp, kp.sum(dim=2))
    if counter is not None:
        counter.add(2 * b * h * n * d * d)  # kv summary + query application
        counter.add(2 * b * h * n * d)  # key sum + normalizer
    return out / (z.unsqueeze(-1) + 1e-6)


def channel_attention(
    q: Tensor, k: Tensor, v: Tensor, counter: OpCounter | None = None
) -> Tensor:
    """Attention between channel dimensions; keys pool over all positions.

    The d x d attention matrix is the token-averaged outer product of queries
    and keys, so the cost is also linear in token count.
    """
    b, h, n, d = q.shape
    logits = torch.einsum("bhnd,bhne->bhde", q, k) / (n * d**0.5)
    attn = torch.softmax(logits, dim=-1)
    out = torch.einsum("bhde,bhne->bhnd", attn, v)
    if counter is not None:
        counter.add(2 * b * h * n * d * d)
    return out


class SccaAttention(nn.Module):
    """Parallel spatial/channel cross attention over flattened pixel tokens."""

    def __init__(self, channels: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.qkv_spatial = nn.Linear(channels, 3 * channels)
        self.qkv_channel = nn.Linear(channels, 3 * channels)
        self.out_proj = nn.Linear(channels, channels)

    def forward(self, tokens: Tensor, counter: OpCounter | None = None) -> Tensor:
        qs, ks, vs = self.qkv_spatial(tokens).chunk(3, dim=-1)
        qc, kc, vc = self.qkv_channel(tokens).chunk(3, dim=-1)
        spatial = linear_spatial_attention(
            _split_heads(qs, self.heads),
            _split_heads(ks, self.heads),
            _split_heads(vs, self.heads),
            counter,
        )
        channel = channel_attention(
            _split_heads(qc, self.heads),
            _split_heads(kc, self.heads),
            _split_heads(vc, self.heads),
            counter,
        )
        return self.out_proj(_merge_heads(spatial) + _merge_heads(channel))


class Lat(nn.Module):
    """Linear attention transformer block applied to one skip level."""

    def __init__(self, cfg: LatConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        self.down = nn.Linear(c, c)
        self.norm1 = nn.LayerNorm(c)
        self.attn = SccaAttention(c, cfg.heads)
        self.norm2 = nn.LayerNorm(c)
        self.up = nn.Linear(c, c)

    def forward(self, skip: Tensor, counter: OpCounter | None = None) -> Tensor:
        b, c, h, w = skip.shape
        tokens = skip.flatten(2).transpose(1, 2)  # (B, N, C)
        x = self.down(tokens)
        x = self.norm1(x)
        x = self.attn(x, counter)
        x = self.norm2(x)
        x = self.up(x)
        return skip + x.transpose(1, 2).reshape(b, c, h, w)


class Cab(nn.Module):
    """Cross-attention bridge: bottleneck queries attend to encoder tokens."""

    def __init__(self, cfg: CabConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        self.level_proj = nn.ModuleList(
            nn.Conv2d(sc, c, kernel_size=1) for sc in cfg.skip_channels
        )
        self.q_proj = nn.Linear(c, c)
        self.k_proj = nn.Linear(c, c)
        self.v_proj = nn.Linear(c, c)
        self.out_proj = nn.Linear(c, c)

    def forward(self, bottleneck: Tensor, encoder_skips: tuple[Tensor, ...]) -> Tensor:
        b, c, h, w = bottleneck.shape
        for s in encoder_skips:
            if s.shape[0] != b:
                raise ValueError(
                    f"batch mismatch: bottleneck {b} vs skip {s.shape[0]}"
                )
        # pool every level onto the bottleneck grid and project to a common dim
        ctx = [
            proj(F.adaptive_avg_pool2d(s, (h, w))).flatten(2).transpose(1, 2)
            for proj, s in zip(self.level_proj, encoder_skips)
        ]
        ctx_tokens = torch.cat(ctx, dim=1)  # (B, 4*h*w, C)
        queries = bottleneck.flatten(2).transpose(1, 2)

        heads = self.cfg.heads
        q = _split_heads(self.q_proj(queries), heads)
        k = _split_heads(self.k_proj(ctx_tokens), heads)
        v = _split_heads(self.v_proj(ctx_tokens), heads)
        attn = torch.softmax(q @ k.transpose(-2, -1) / (q.shape[-1] ** 0.5), dim=-1)
        out = self.out_proj(_merge_heads(attn @ v))
        return bottleneck + out.transpose(1, 2).reshape(b, c, h, w)


class SkipFusion(nn.Module):
    """Add a resized, channel-projected companion skip onto a processed skip."""

    def __init__(self, companion_channels: int, channels: int) -> None:
        super().__init__()
        self.companion_channels = companion_channels
        self.channels = channels
        self.proj = nn.Conv2d(companion_channels, channels, kernel_size=1)

    def forward(self, processed_skip: Tensor, companion_skip: Tensor) -> Tensor:
        if companion_skip.shape[1] != self.companion_channels:
            raise ValueError(
                f"companion skip has {companion_skip.shape[1]} channels, "
                f"expected {self.companion_channels} (wrong pyramid level?)"
            )
        if processed_skip.shape[1] != self.channels:
            raise ValueError(
                f"skip has {processed_skip.shape[1]} channels, expected {self.channels}"
            )
        if processed_skip.shape[0] != companion_skip.shape[0]:
            raise ValueError("batch mismatch between fusion operands")
        resized = bilinear_resize(companion_skip, processed_skip.shape[-2:])
        return processed_skip + self.proj(resized)


class BottleneckFusion(SkipFusion):
    """Same additive projection, applied at the bridge level."""
