"""Multi-scale cascaded dual-backbone segmentation with adaptive loss mixing."""

from .config import TrainConfig, parse_config, write_config
from .data import (
    ClassOrder,
    NormalizeConfig,
    SliceSample,
    SplitManifest,
    Volume,
    load_dataset,
    load_volume,
    make_split,
    merge_labels,
    save_dataset,
    slice_and_normalize,
    synth_dataset,
)
from .fcb import FcbBackbone, FcbConfig
from .fusion import Cab, CabConfig, Lat, LatConfig, OpCounter
from .heads import FinalWeights, PredictionHeads, final_pred, pairwise_aggregate
from .losses import CombinedLossConfig, dice_ce_loss, one_hot, segmentation_loss
from .metrics import MetricReport, dsc, hd95, recall_precision
from .mfa import (
    MfaWeightState,
    SubsetSets,
    enumerate_subsets,
    set_loss,
    subset_prediction,
    total_loss,
    update_weights,
)
from .network import ARCH_MODES, McfNet, ModelOutput, NetworkConfig
from .resize import bilinear_resize, bilinear_resize_np, nearest_resize_np
from .seb import SamGate, SEBlock, SebBackbone, SebConfig, gate_input
from .trainer import TrainResult, evaluate, lr_schedule, train

__version__ = "0.1.0"

__all__ = [
    "ARCH_MODES",
    "Cab",
    "CabConfig",
    "ClassOrder",
    "CombinedLossConfig",
    "FcbBackbone",
    "FcbConfig",
    "FinalWeights",
    "Lat",
    "LatConfig",
    "McfNet",
    "MetricReport",
    "MfaWeightState",
    "ModelOutput",
    "NetworkConfig",
    "NormalizeConfig",
    "OpCounter",
    "PredictionHeads",
    "SamGate",
    "SEBlock",
    "SebBackbone",
    "SebConfig",
    "SliceSample",
    "SplitManifest",
    "SubsetSets",
    "TrainConfig",
    "TrainResult",
    "Volume",
    "bilinear_resize",
    "bilinear_resize_np",
    "dice_ce_loss",
    "dsc",
    "enumerate_subsets",
    "evaluate",
    "final_pred",
    "gate_input",
    "hd95",
    "load_dataset",
    "load_volume",
    "lr_schedule",
    "make_split",
    "merge_labels",
    "nearest_resize_np",
    "one_hot",
    "pairwise_aggregate",
    "parse_config",
    "recall_precision",
    "save_dataset",
    "segmentation_loss",
    "set_loss",
    "slice_and_normalize",
    "subset_prediction",
    "synth_dataset",
    "total_loss",
    "train",
    "update_weights",
    "write_config",
]
