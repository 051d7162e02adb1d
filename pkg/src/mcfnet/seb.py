"""Sharp Extraction Backbone: a light SE-attention U-shaped network.

Runs on the full-resolution image and produces four encoder skips, four
decoder features, a single-channel top prediction map, and a sigmoid-gated
copy of its input for the second backbone. Spatial size must be divisible
by 16 (four pooling levels).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .resize import bilinear_resize


@dataclass
class SebConfig:
    in_channels: int = 1
    # stem + four encoder levels
    encoder_channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    # deepest -> shallowest decoder outputs; fixed so prediction heads share
    # channel counts (64, 64, 128, 256) with the second backbone
    decoder_channels: tuple[int, ...] = (256, 128, 64, 64)
    se_reduction: int = 8

    def __post_init__(self) -> None:
        if len(self.encoder_channels) != 5 or len(self.decoder_channels) != 4:
            raise ValueError("expected 5 encoder (stem + 4 levels) and 4 decoder channels")
        for c in self.encoder_channels[1:]:
            if c % self.se_reduction != 0:
                raise ValueError(
                    f"encoder channels {self.encoder_channels[1:]} must be divisible "
                    f"by se_reduction={self.se_reduction}"
                )


@dataclass
class SebForwardOutput:
    """Everything a SEB forward pass yields, pyramid lists finest-first."""

    skips: tuple[Tensor, ...]  # four maps at 1, 1/2, 1/4, 1/8 scale
    decoder_features: tuple[Tensor, ...]  # finest-first, channels (64, 64, 128, 256)
    s_output: Tensor  # (B, 1, H, W) top prediction map
    gate: Tensor  # (B, 1, H, W) sigmoid gate, values in (0, 1)
    gated_image: Tensor  # input image * gate


class SEBlock(nn.Module):
    """Squeeze-and-excitation: rescale channels by a pooled sigmoid gate.

    The bottleneck uses SiLU rather than ReLU so narrow reductions cannot go
    entirely dead at initialization.
    """

    def __init__(self, channels: int, reduction: int) -> None:
        super().__init__()
        if channels < reduction or channels % reduction != 0:
            raise ValueError(f"channels={channels} not divisible by reduction={reduction}")
        self.fc1 = nn.Linear(channels, channels // reduction)
        self.fc2 = nn.Linear(channels // reduction, channels)

    def forward(self, x: Tensor) -> Tensor:
        pooled = x.mean(dim=(2, 3))
        gate = torch.sigmoid(self.fc2(torch.nn.functional.silu(self.fc1(pooled))))
        return x * gate[:, :, None, None]


class SamGate(nn.Module):
    """Sigmoid activation map: 1x1 conv to one channel, then sigmoid.

    Output values are strictly inside (0, 1).
    """

    def __init__(self, in_channels: int = 1) -> None:
        super().__init__()
        self.proj = nn.Conv2d(in_channels, 1, kernel_size=1)

    def forward(self, features: Tensor) -> Tensor:
        return torch.sigmoid(self.proj(features))


def gate_input(image: Tensor, gate: Tensor) -> Tensor:
    """Hadamard-gate an image with a single-channel gate map.

    Since the gate lies in (0, 1) the product never exceeds the input
    magnitude elementwise.
    """
    if image.shape[-2:] != gate.shape[-2:]:
        raise ValueError(f"spatial mismatch: image {image.shape} vs gate {gate.shape}")
    return image * gate


def _conv_bn_relu(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class _EncoderLevel(nn.Module):
    """MaxPool -> double conv -> SE."""

    def __init__(self, in_ch: int, out_ch: int, reduction: int) -> None:
        super().__init__()
        self.pool = nn.MaxPool2d(2)
        self.conv = nn.Sequential(_conv_bn_relu(in_ch, out_ch), _conv_bn_relu(out_ch, out_ch))
        self.se = SEBlock(out_ch, reduction)

    def forward(self, x: Tensor) -> Tensor:
        return self.se(self.conv(self.pool(x)))


class _DecoderStage(nn.Module):
    """Bilinear upsample, concat skip, single conv block (kept light)."""

    def __init__(self, in_ch: int, skip_ch: int, out_ch: int) -> None:
        super().__init__()
        self.conv = _conv_bn_relu(in_ch + skip_ch, out_ch)

    def forward(self, x: Tensor, skip: Tensor) -> Tensor:
        x = bilinear_resize(x, skip.shape[-2:])
        return self.conv(torch.cat([x, skip], dim=1))


class SebBackbone(nn.Module):
    def __init__(self, cfg: SebConfig | None = None) -> None:
        super().__init__()
        self.cfg = cfg or SebConfig()
        enc = self.cfg.encoder_channels
        dec = self.cfg.decoder_channels
        self.stem = _conv_bn_relu(self.cfg.in_channels, enc[0])
        self.levels = nn.ModuleList(
            _EncoderLevel(enc[i], enc[i + 1], self.cfg.se_reduction) for i in range(4)
        )
        # decoder runs deepest -> shallowest; skips are enc[3], enc[2], enc[1], enc[0]
        ins = (enc[4], dec[0], dec[1], dec[2])
        skips = (enc[3], enc[2], enc[1], enc[0])
        self.decoder = nn.ModuleList(
            _DecoderStage(ins[i], skips[i], dec[i]) for i in range(4)
        )
        self.out_conv = nn.Conv2d(dec[3], 1, kernel_size=1)
        self.sam = SamGate(in_channels=1)

    @property
    def skip_channels(self) -> tuple[int, ...]:
        """Finest-first channel counts of the four skips."""
        return self.cfg.encoder_channels[:4]

    @property
    def decoder_out_channels(self) -> tuple[int, ...]:
        """Finest-first channel counts of the four decoder features."""
        return tuple(reversed(self.cfg.decoder_channels))

    def forward(self, image: Tensor) -> SebForwardOutput:
        h, w = image.shape[-2:]
        if h % 16 or w % 16:
            raise ValueError(f"input size {h}x{w} must be divisible by 16")
        x = self.stem(image)
        skips = [x]
        for level in self.levels:
            x = level(x)
            skips.append(x)
        deepest = skips.pop()  # enc[4] at 1/16 scale

        feats: list[Tensor] = []
        x = deepest
        for stage, skip in zip(self.decoder, reversed(skips)):
            x = stage(x, skip)
            feats.append(x)
        s_output = self.out_conv(feats[-1])
        gate = self.sam(s_output)
        gated = gate_input(image, gate)
        return SebForwardOutput(
            skips=tuple(skips),
            decoder_features=tuple(reversed(feats)),
            s_output=s_output,
            gate=gate,
            gated_image=gated,
        )
