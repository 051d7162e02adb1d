"""Flexible Connection Backbone: the main U-shaped encoder/decoder.

The encoder is a classic max-pool + double-conv pyramid. Its skip features
are returned raw; skip processing (attention, cross-backbone fusion) happens
outside so the decoder can consume either raw or fused skips.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .resize import bilinear_resize


@dataclass
class FcbConfig:
    in_channels: int = 1
    # finest-first skip channels; a bottleneck level follows the last skip
    encoder_channels: tuple[int, ...] = (64, 128, 256, 512)
    bottleneck_channels: int = 512
    # deepest -> shallowest decoder outputs, matching the head channel plan
    decoder_channels: tuple[int, ...] = (256, 128, 64, 64)

    def __post_init__(self) -> None:
        if len(self.encoder_channels) != 4 or len(self.decoder_channels) != 4:
            raise ValueError("expected 4 encoder skip channels and 4 decoder channels")


@dataclass
class FcbEncodeOutput:
    skips: tuple[Tensor, ...]  # finest-first, at 1, 1/2, 1/4, 1/8 scale
    bottleneck: Tensor  # at 1/16 scale


def _double_conv(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, kernel_size=3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class _DecoderStage(nn.Module):
    def __init__(self, in_ch: int, skip_ch: int, out_ch: int) -> None:
        super().__init__()
        self.skip_ch = skip_ch
        self.conv = _double_conv(in_ch + skip_ch, out_ch)

    def forward(self, x: Tensor, skip: Tensor) -> Tensor:
        x = bilinear_resize(x, (x.shape[-2] * 2, x.shape[-1] * 2))
        if skip.shape[-2:] != x.shape[-2:] or skip.shape[1] != self.skip_ch:
            raise ValueError(
                f"skip shape {tuple(skip.shape)} does not match decoder stage "
                f"expecting ({self.skip_ch}, {x.shape[-2]}, {x.shape[-1]})"
            )
        return self.conv(torch.cat([x, skip], dim=1))


class FcbBackbone(nn.Module):
    def __init__(self, cfg: FcbConfig | None = None) -> None:
        super().__init__()
        self.cfg = cfg or FcbConfig()
        enc = self.cfg.encoder_channels
        dec = self.cfg.decoder_channels
        bott = self.cfg.bottleneck_channels
        self.stem = _double_conv(self.cfg.in_channels, enc[0])
        self.pool = nn.MaxPool2d(2)
        self.levels = nn.ModuleList(
            _double_conv(enc[i], enc[i + 1]) for i in range(3)
        )
        self.bottleneck = _double_conv(enc[3], bott)
        ins = (bott, dec[0], dec[1], dec[2])
        skips = (enc[3], enc[2], enc[1], enc[0])
        self.decoder = nn.ModuleList(
            _DecoderStage(ins[i], skips[i], dec[i]) for i in range(4)
        )

    @property
    def skip_channels(self) -> tuple[int, ...]:
        return self.cfg.encoder_channels

    @property
    def decoder_out_channels(self) -> tuple[int, ...]:
        """Finest-first channel counts of the four decoder features."""
        return tuple(reversed(self.cfg.decoder_channels))

    def encode(self, image: Tensor) -> FcbEncodeOutput:
        h, w = image.shape[-2:]
        if h % 16 or w % 16:
            raise ValueError(f"input size {h}x{w} must be divisible by 16")
        x = self.stem(image)
        skips = [x]
        for level in self.levels:
            x = level(self.pool(x))
            skips.append(x)
        bottleneck = self.bottleneck(self.pool(x))
        return FcbEncodeOutput(skips=tuple(skips), bottleneck=bottleneck)

    def decode(self, bridge: Tensor, fused_skips: tuple[Tensor, ...]) -> tuple[Tensor, ...]:
        """Run the decoder on a (possibly fused) bridge and skip pyramid.

        Returns decoder features finest-first, channels (64, 64, 128, 256)
        under the default plan.
        """
        feats: list[Tensor] = []
        x = bridge
        for stage, skip in zip(self.decoder, reversed(fused_skips)):
            x = stage(x, skip)
            feats.append(x)
        return tuple(reversed(feats))

    def forward(self, image: Tensor) -> tuple[Tensor, ...]:
        out = self.encode(image)
        return self.decode(out.bottleneck, out.skips)
