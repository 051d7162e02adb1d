"""Config-driven training and evaluation.

Per iteration: forward the configured architecture, build the four per-scale
prediction maps at ground-truth resolution, compute either the adaptive
multi-set loss or the plain loss on the final map, and take an Adam step.
Per epoch: apply the cosine learning-rate schedule, update the adaptive set
weights from the epoch-mean set losses, append one fixed-format log line
(epoch, lr, LOSS, L1..L4, W1..W4, train DSC), and write checkpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import Tensor

from .config import TrainConfig
from .data import SliceSample, load_dataset
from .heads import FinalWeights
from .losses import CombinedLossConfig, segmentation_loss
from .metrics import MetricReport, dsc, evaluate_case
from .mfa import MfaWeightState, enumerate_subsets, set_loss, total_loss, update_weights
from .network import McfNet, ModelOutput, NetworkConfig

LOG_NAME = "train_log.tsv"
LOG_COLUMNS = (
    "epoch", "lr", "loss", "l1", "l2", "l3", "l4",
    "w1", "w2", "w3", "w4", "train_dsc",
)


def lr_schedule(epoch: int, base_lr: float, max_epochs: int) -> float:
    """Cosine annealing from base_lr toward zero, evaluated per epoch."""
    if not 0 <= epoch < max_epochs:
        raise ValueError(f"epoch {epoch} out of range [0, {max_epochs})")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / max_epochs))


def network_config(cfg: TrainConfig) -> NetworkConfig:
    return NetworkConfig(
        n_classes=cfg.classes,
        arch=cfg.arch,
        fcb_image_size=cfg.fcb_image_size,
        channel_div=cfg.channel_div,
        se_reduction=cfg.se_reduction,
        attention_heads=cfg.attention_heads,
        head_kernel_size=cfg.head_kernel_size,
        final_weights=FinalWeights(*cfg.final_weights),
    )


def loss_config(cfg: TrainConfig) -> CombinedLossConfig:
    return CombinedLossConfig(
        n_classes=cfg.classes,
        dice_weight=cfg.dice_weight if cfg.dice_weight > 0 else None,
    )


def _to_tensors(samples: Sequence[SliceSample]) -> tuple[Tensor, Tensor]:
    images = torch.from_numpy(np.stack([s.image for s in samples]))[:, None]
    masks = torch.from_numpy(np.stack([s.mask.astype(np.int64) for s in samples]))
    return images.float(), masks


def _batch_mean_dsc(pred_labels: Tensor, masks: Tensor, n_classes: int) -> float:
    pred = pred_labels.cpu().numpy()
    gt = masks.cpu().numpy()
    scores = [dsc(pred == c, gt == c) for c in range(1, n_classes)]
    return float(np.mean(scores)) if scores else 100.0


@dataclass
class TrainResult:
    out_dir: Path
    log_path: Path
    last_checkpoint: Path
    best_checkpoint: Path
    final_train_dsc: float
    epochs_run: int
    iterations_run: int
    mfa_state: MfaWeightState


def save_checkpoint(
    path: str | Path,
    model: McfNet,
    optimizer: torch.optim.Optimizer | None,
    mfa_state: MfaWeightState,
    epoch: int,
    cfg: TrainConfig,
) -> None:
    torch.save(
        {
            "model": model.state_dict(),
            "optimizer": optimizer.state_dict() if optimizer else None,
            "mfa_state": {
                "weights": mfa_state.weights,
                "policy": mfa_state.policy,
                "rho": mfa_state.rho,
                "tau": mfa_state.tau,
            },
            "epoch": epoch,
            "config": cfg.__dict__,
            "config_fingerprint": cfg.fingerprint(),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[McfNet, TrainConfig, MfaWeightState, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    raw = dict(payload["config"])
    raw["final_weights"] = tuple(raw["final_weights"])
    cfg = TrainConfig(**raw).validate()
    model = McfNet(network_config(cfg))
    model.load_state_dict(payload["model"])
    state = MfaWeightState(
        weights=tuple(payload["mfa_state"]["weights"]),
        policy=payload["mfa_state"]["policy"],
        rho=payload["mfa_state"]["rho"],
        tau=payload["mfa_state"]["tau"],
    )
    return model, cfg, state, payload


def _iteration_loss(
    out: ModelOutput,
    masks: Tensor,
    base_loss,
    cfg: TrainConfig,
    subsets,
    mfa_state: MfaWeightState,
) -> tuple[Tensor, list[float]]:
    """Returns (loss to optimize, per-set losses as floats or NaNs)."""
    if cfg.adaptive_mfa:
        per_set = [
            set_loss(group, out.head_maps, masks, base_loss, cfg.mfa_set_reduction)
            for group in subsets.by_size
        ]
        return total_loss(per_set, mfa_state), [float(v.detach()) for v in per_set]
    return base_loss(out.pred, masks), [math.nan] * 4


def train(cfg: TrainConfig, samples: Sequence[SliceSample] | None = None) -> TrainResult:
    """Run the configured training; returns paths of logs and checkpoints.

    ``samples`` overrides loading the train partition from ``cfg.dataset``.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / LOG_NAME

    if samples is None:
        samples, meta = load_dataset(cfg.dataset, partition="train")
        if meta.classes != cfg.classes:
            raise ValueError(
                f"dataset has {meta.classes} classes but config says {cfg.classes}"
            )
    if not samples:
        raise ValueError("training dataset is empty")

    torch.manual_seed(cfg.seed)
    model = McfNet(network_config(cfg))
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.base_lr, weight_decay=cfg.weight_decay
    )
    lcfg = loss_config(cfg)
    base_loss = lambda logits, target: segmentation_loss(logits, target, lcfg)
    subsets = enumerate_subsets(4)
    mfa_state = MfaWeightState(
        weights=(cfg.mfa_init_weight,) * 4,
        policy=cfg.mfa_policy,
        rho=cfg.mfa_rho,
        tau=cfg.mfa_tau,
    )

    # optional held-out fold of the training cases for best-checkpoint selection
    case_ids = sorted({s.case_id for s in samples})
    rng = np.random.default_rng(cfg.seed)
    n_val = int(round(cfg.val_fraction * len(case_ids)))
    val_cases = set(rng.permutation(case_ids)[:n_val].tolist()) if n_val else set()
    fit_samples = [s for s in samples if s.case_id not in val_cases]
    val_samples = [s for s in samples if s.case_id in val_cases]
    if not fit_samples:
        raise ValueError("validation holdout left no training samples")

    images, masks = _to_tensors(fit_samples)
    n = images.shape[0]
    batch = min(cfg.batch_size, n)

    log_lines = ["\t".join(LOG_COLUMNS)]
    best_dsc = -1.0
    last_path = out_dir / "last.pt"
    best_path = out_dir / "best.pt"
    iterations = 0
    epochs_run = 0
    epoch_dsc = 0.0
    stop = False

    for epoch in range(cfg.max_epochs):
        lr = lr_schedule(epoch, cfg.base_lr, cfg.max_epochs)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = torch.randperm(n, generator=torch.Generator().manual_seed(cfg.seed + epoch))

        model.train()
        epoch_losses: list[float] = []
        epoch_set_losses: list[list[float]] = []
        epoch_dscs: list[float] = []
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            if idx.numel() < 2:  # BatchNorm needs more than one sample
                continue
            out = model(images[idx])
            loss, per_set = _iteration_loss(out, masks[idx], base_loss, cfg, subsets, mfa_state)
            if not torch.isfinite(loss):
                diagnostic = f"# ABORT\tnon-finite loss at epoch {epoch} iteration {iterations}"
                log_lines.append(diagnostic)
                log_path.write_text("\n".join(log_lines) + "\n")
                raise RuntimeError(diagnostic.lstrip("# "))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            epoch_losses.append(float(loss.detach()))
            epoch_set_losses.append(per_set)
            epoch_dscs.append(
                _batch_mean_dsc(out.pred.detach().argmax(dim=1), masks[idx], cfg.classes)
            )
            iterations += 1
            if cfg.max_iterations and iterations >= cfg.max_iterations:
                stop = True
                break

        epoch_dsc = float(np.mean(epoch_dscs)) if epoch_dscs else math.nan
        mean_sets = (
            [float(np.mean([row[k] for row in epoch_set_losses])) for k in range(4)]
            if epoch_set_losses
            else [math.nan] * 4
        )
        if cfg.adaptive_mfa and epoch_set_losses:
            mfa_state = update_weights(mfa_state, mean_sets)

        record = [
            f"{epoch}", f"{lr:.8g}", f"{np.mean(epoch_losses):.8g}",
            *(f"{v:.8g}" for v in mean_sets),
            *(f"{w:.8g}" for w in mfa_state.weights),
            f"{epoch_dsc:.6f}",
        ]
        log_lines.append("\t".join(record))
        epochs_run = epoch + 1

        save_checkpoint(last_path, model, optimizer, mfa_state, epoch, cfg)
        selection = epoch_dsc
        if val_samples:
            selection = _quick_val_dsc(model, val_samples, cfg)
        if selection >= best_dsc:
            best_dsc = selection
            save_checkpoint(best_path, model, optimizer, mfa_state, epoch, cfg)
        if stop:
            break

    log_path.write_text("\n".join(log_lines) + "\n")
    return TrainResult(
        out_dir=out_dir,
        log_path=log_path,
        last_checkpoint=last_path,
        best_checkpoint=best_path,
        final_train_dsc=epoch_dsc,
        epochs_run=epochs_run,
        iterations_run=iterations,
        mfa_state=mfa_state,
    )


@torch.no_grad()
def _quick_val_dsc(model: McfNet, samples: Sequence[SliceSample], cfg: TrainConfig) -> float:
    model.eval()
    images, masks = _to_tensors(samples)
    scores = []
    for start in range(0, images.shape[0], cfg.batch_size):
        out = model(images[start : start + cfg.batch_size])
        scores.append(
            _batch_mean_dsc(out.pred.argmax(dim=1), masks[start : start + cfg.batch_size], cfg.classes)
        )
    model.train()
    return float(np.mean(scores))


@torch.no_grad()
def predict_labels(model: McfNet, samples: Sequence[SliceSample], batch_size: int = 8) -> np.ndarray:
    """Argmax class labels of the final prediction for each sample."""
    model.eval()
    images, _ = _to_tensors(samples)
    preds = []
    for start in range(0, images.shape[0], batch_size):
        out = model(images[start : start + batch_size])
        preds.append(out.pred.argmax(dim=1).cpu().numpy())
    return np.concatenate(preds) if preds else np.zeros((0,))


def evaluate(
    checkpoint: str | Path,
    data_dir: str | Path,
    partition: str = "test",
    batch_size: int = 8,
) -> MetricReport:
    """Evaluate a checkpoint on a dataset partition, stacking slices per case."""
    model, cfg, _, _ = load_checkpoint(checkpoint)
    samples, meta = load_dataset(data_dir, partition=partition)
    if meta.classes != cfg.classes:
        raise ValueError(
            f"checkpoint was trained with {cfg.classes} classes but dataset has {meta.classes}"
        )
    if not samples:
        raise ValueError(f"no samples in partition {partition!r}")
    preds = predict_labels(model, samples, batch_size)

    report = MetricReport()
    by_case: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_case.setdefault(s.case_id, []).append(i)
    for case_id in sorted(by_case):
        idx = sorted(by_case[case_id], key=lambda i: samples[i].index)
        pred_stack = np.stack([preds[i] for i in idx])
        gt_stack = np.stack([samples[i].mask for i in idx])
        report.rows.extend(evaluate_case(case_id, pred_stack, gt_stack, cfg.classes))
    return report
