"""The assembled segmentation network.

Three architecture modes share one forward contract:

* ``seb``      - the light backbone alone on the full-resolution image;
* ``fcb``      - the main backbone alone (attention-processed skips and
                 bridge) on the image resized to its working resolution;
* ``cascade``  - SEB gates its own input image, the gated image feeds FCB,
                 SEB features fuse additively into FCB's skip pyramid and
                 bridge, and per-scale predictions merge pairwise.

Every mode yields four class-logit maps p1..p4 (finest scale first) resized
to the input resolution, plus their weighted sum as the final prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from torch import Tensor, nn

from .fcb import FcbBackbone, FcbConfig
from .fusion import BottleneckFusion, Cab, CabConfig, Lat, LatConfig, SkipFusion
from .heads import FinalWeights, PredictionHeads, final_pred, pairwise_aggregate
from .resize import bilinear_resize
from .seb import SebBackbone, SebConfig, SebForwardOutput

ARCH_MODES = ("seb", "fcb", "cascade")

SEB_ENCODER_PLAN = (16, 32, 64, 128, 256)
FCB_ENCODER_PLAN = (64, 128, 256, 512)
DECODER_PLAN = (256, 128, 64, 64)  # deepest -> shallowest


@dataclass
class NetworkConfig:
    n_classes: int
    arch: str = "cascade"
    fcb_image_size: int = 224
    channel_div: int = 1  # divide every channel plan by this (micro configs)
    se_reduction: int = 8
    attention_heads: int = 4
    head_kernel_size: int = 1
    final_weights: FinalWeights = field(default_factory=FinalWeights)

    def __post_init__(self) -> None:
        if self.arch not in ARCH_MODES:
            raise ValueError(f"arch must be one of {ARCH_MODES}, got {self.arch!r}")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes (background + foreground)")
        if self.fcb_image_size % 16:
            raise ValueError("fcb_image_size must be divisible by 16")

    def _scaled(self, plan: tuple[int, ...]) -> tuple[int, ...]:
        div = self.channel_div
        scaled = tuple(c // div for c in plan)
        if any(c < 1 for c in scaled):
            raise ValueError(f"channel_div={div} collapses plan {plan}")
        return scaled

    def seb_config(self) -> SebConfig:
        return SebConfig(
            encoder_channels=self._scaled(SEB_ENCODER_PLAN),
            decoder_channels=self._scaled(DECODER_PLAN),
            se_reduction=self.se_reduction,
        )

    def fcb_config(self) -> FcbConfig:
        return FcbConfig(
            encoder_channels=self._scaled(FCB_ENCODER_PLAN),
            bottleneck_channels=512 // self.channel_div,
            decoder_channels=self._scaled(DECODER_PLAN),
        )


@dataclass
class ModelOutput:
    """Forward results; intermediate fields are populated per mode."""

    head_maps: tuple[Tensor, ...]  # p1..p4 at the input resolution
    pred: Tensor  # weighted sum of head maps
    head_scales: tuple[tuple[int, int], ...]  # native resolution of each map
    seb: SebForwardOutput | None = None
    fcb_input: Tensor | None = None
    fcb_skips: tuple[Tensor, ...] | None = None
    fused_skips: tuple[Tensor, ...] | None = None
    bridge: Tensor | None = None
    fcb_decoder: tuple[Tensor, ...] | None = None
    seb_head_maps: tuple[Tensor, ...] | None = None
    fcb_head_maps: tuple[Tensor, ...] | None = None


class McfNet(nn.Module):
    def __init__(self, cfg: NetworkConfig) -> None:
        super().__init__()
        self.cfg = cfg
        heads = cfg.attention_heads
        n = cfg.n_classes
        k = cfg.head_kernel_size

        self.seb: SebBackbone | None = None
        self.fcb: FcbBackbone | None = None
        if cfg.arch in ("seb", "cascade"):
            self.seb = SebBackbone(cfg.seb_config())
            self.seb_heads = PredictionHeads(self.seb.decoder_out_channels, n, k)
        if cfg.arch in ("fcb", "cascade"):
            self.fcb = FcbBackbone(cfg.fcb_config())
            fcb_cfg = self.fcb.cfg
            self.lats = nn.ModuleList(
                Lat(LatConfig(c, heads)) for c in fcb_cfg.encoder_channels
            )
            self.cab = Cab(
                CabConfig(
                    channels=fcb_cfg.bottleneck_channels,
                    skip_channels=fcb_cfg.encoder_channels,
                    heads=heads,
                )
            )
            self.fcb_heads = PredictionHeads(self.fcb.decoder_out_channels, n, k)
        if cfg.arch == "cascade":
            seb_skip_ch = self.seb.skip_channels
            fcb_skip_ch = self.fcb.cfg.encoder_channels
            self.skip_fusions = nn.ModuleList(
                SkipFusion(sc, fc) for sc, fc in zip(seb_skip_ch, fcb_skip_ch)
            )
            self.bottleneck_fusion = BottleneckFusion(
                seb_skip_ch[3], self.fcb.cfg.bottleneck_channels
            )

    def _to_input_scale(self, maps: list[Tensor], size: tuple[int, int]) -> tuple:
        scales = tuple(tuple(m.shape[-2:]) for m in maps)
        return tuple(bilinear_resize(m, size) for m in maps), scales

    def _fcb_pass(self, image: Tensor, seb_out: SebForwardOutput | None):
        enc = self.fcb.encode(image)
        processed = tuple(lat(s) for lat, s in zip(self.lats, enc.skips))
        bridge = self.cab(enc.bottleneck, enc.skips)
        if seb_out is not None:
            processed = tuple(
                fuse(p, s)
                for fuse, p, s in zip(self.skip_fusions, processed, seb_out.skips)
            )
            bridge = self.bottleneck_fusion(bridge, seb_out.skips[3])
        decoder = self.fcb.decode(bridge, processed)
        return enc, processed, bridge, decoder

    def forward(self, image: Tensor) -> ModelOutput:
        size = tuple(image.shape[-2:])
        fcb_size = (self.cfg.fcb_image_size, self.cfg.fcb_image_size)

        if self.cfg.arch == "seb":
            seb_out = self.seb(image)
            maps = self.seb_heads(seb_out.decoder_features)
            head_maps, scales = self._to_input_scale(maps, size)
            pred = final_pred(head_maps, self.cfg.final_weights)
            return ModelOutput(head_maps, pred, scales, seb=seb_out, seb_head_maps=tuple(maps))

        if self.cfg.arch == "fcb":
            fcb_in = bilinear_resize(image, fcb_size)
            enc, processed, bridge, decoder = self._fcb_pass(fcb_in, None)
            maps = self.fcb_heads(decoder)
            head_maps, scales = self._to_input_scale(maps, size)
            pred = final_pred(head_maps, self.cfg.final_weights)
            return ModelOutput(
                head_maps,
                pred,
                scales,
                fcb_input=fcb_in,
                fcb_skips=enc.skips,
                fused_skips=processed,
                bridge=bridge,
                fcb_decoder=decoder,
                fcb_head_maps=tuple(maps),
            )

        seb_out = self.seb(image)
        fcb_in = bilinear_resize(seb_out.gated_image, fcb_size)
        enc, processed, bridge, decoder = self._fcb_pass(fcb_in, seb_out)
        seb_maps = self.seb_heads(seb_out.decoder_features)
        fcb_maps = self.fcb_heads(decoder)
        merged = [pairwise_aggregate(s, f) for s, f in zip(seb_maps, fcb_maps)]
        head_maps, scales = self._to_input_scale(merged, size)
        pred = final_pred(head_maps, self.cfg.final_weights)
        return ModelOutput(
            head_maps,
            pred,
            scales,
            seb=seb_out,
            fcb_input=fcb_in,
            fcb_skips=enc.skips,
            fused_skips=processed,
            bridge=bridge,
            fcb_decoder=decoder,
            seb_head_maps=tuple(seb_maps),
            fcb_head_maps=tuple(fcb_maps),
        )
