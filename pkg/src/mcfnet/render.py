"""Static output rendering: per-sample contour overlays and loss curves."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .data import SliceSample
from .metrics import boundary_points

# distinct contour colors per class, ground truth vs prediction
_GT_COLOR = np.array([0.1, 0.9, 0.2])
_PRED_COLOR = np.array([0.95, 0.15, 0.15])


def _draw_contours(canvas: np.ndarray, mask: np.ndarray, color: np.ndarray) -> None:
    for c in np.unique(mask):
        if c == 0:
            continue
        pts = boundary_points(mask == c)
        canvas[pts[:, 0], pts[:, 1]] = color


def overlay_image(sample: SliceSample, pred_mask: np.ndarray | None) -> np.ndarray:
    """Grayscale base with ground-truth (green) and prediction (red) contours."""
    canvas = np.repeat(sample.image[:, :, None], 3, axis=2).astype(np.float64)
    _draw_contours(canvas, sample.mask, _GT_COLOR)
    if pred_mask is not None and pred_mask.any():
        _draw_contours(canvas, pred_mask, _PRED_COLOR)
    return np.clip(canvas, 0.0, 1.0)


def render_overlays(
    samples: Sequence[SliceSample],
    pred_masks: Sequence[np.ndarray] | None,
    out_dir: str | Path,
) -> list[Path]:
    """Write one overlay PNG per sample; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, sample in enumerate(samples):
        pred = pred_masks[i] if pred_masks is not None else None
        rgb = (overlay_image(sample, pred) * 255).astype(np.uint8)
        path = out_dir / f"overlay_{sample.case_id}_{sample.index:04d}.png"
        Image.fromarray(rgb).save(path)
        paths.append(path)
    return paths


def render_loss_curve(log_path: str | Path, out_dir: str | Path) -> Path:
    """Plot total loss (and adaptive weights when present) from a training log."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    epochs, losses, weights = [], [], []
    lines = Path(log_path).read_text().splitlines()
    header = lines[0].split("\t")
    for line in lines[1:]:
        if line.startswith("#") or not line.strip():
            continue
        row = dict(zip(header, line.split("\t")))
        epochs.append(int(row["epoch"]))
        losses.append(float(row["loss"]))
        weights.append([float(row[f"w{k}"]) for k in range(1, 5)])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    w = np.asarray(weights)
    if len(w) and not np.allclose(w, w[0]):
        ax2 = ax.twinx()
        for k in range(4):
            ax2.plot(epochs, w[:, k], alpha=0.5, linestyle="--", label=f"W{k + 1}")
        ax2.set_ylabel("set weight")
    ax.legend(loc="upper right")
    fig.tight_layout()
    path = out_dir / "loss_curve.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
