"""Segmentation evaluation metrics: DSC, HD95, recall, precision.

All four report percentages except HD95, which is a distance in spacing
units (pixels when spacing is omitted). HD95 pools boundary-to-boundary
nearest distances from both directions and takes the 95th percentile;
boundary pixels are mask pixels with at least one background 4-neighbor
(the image border counts as background).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist


def _as_bool(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) != 0


def dsc(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """Dice overlap in percent; two empty masks count as a perfect 100."""
    a, b = _as_bool(pred_mask), _as_bool(gt_mask)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 100.0
    return 100.0 * 2.0 * int((a & b).sum()) / total


def recall_precision(pred_mask: np.ndarray, gt_mask: np.ndarray) -> tuple[float, float]:
    """(recall %, precision %). An empty denominator scores 100 only when the
    other mask is empty too, otherwise 0."""
    a, b = _as_bool(pred_mask), _as_bool(gt_mask)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    tp = int((a & b).sum())
    n_pred, n_gt = int(a.sum()), int(b.sum())
    recall = 100.0 * tp / n_gt if n_gt else (100.0 if n_pred == 0 else 0.0)
    precision = 100.0 * tp / n_pred if n_pred else (100.0 if n_gt == 0 else 0.0)
    return recall, precision


def boundary_points(mask: np.ndarray) -> np.ndarray:
    """Coordinates of mask pixels adjacent to background (border = background).

    Works for 2D and 3D masks; adjacency is the 2*ndim face neighborhood.
    """
    m = _as_bool(mask)
    interior = np.ones_like(m)
    for axis in range(m.ndim):
        shifted_fwd = np.zeros_like(m)
        shifted_bwd = np.zeros_like(m)
        src = [slice(None)] * m.ndim
        dst = [slice(None)] * m.ndim
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
        shifted_fwd[tuple(dst)] = m[tuple(src)]
        shifted_bwd[tuple(src)] = m[tuple(dst)]
        interior &= shifted_fwd & shifted_bwd
    return np.argwhere(m & ~interior)


class Hd95Result(NamedTuple):
    value: float
    empty_penalty: bool  # True when one mask was empty and the diagonal was used


def hd95(
    pred_mask: np.ndarray,
    gt_mask: np.ndarray,
    spacing: Sequence[float] | None = None,
) -> Hd95Result:
    """95th percentile of pooled bidirectional boundary distances.

    Identical masks give 0. If exactly one mask is empty the image diagonal
    (in spacing units) is returned and the result is flagged.
    """
    a, b = _as_bool(pred_mask), _as_bool(gt_mask)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    sp = np.ones(a.ndim) if spacing is None else np.asarray(spacing, dtype=np.float64)
    if a.sum() == 0 and b.sum() == 0:
        return Hd95Result(0.0, False)
    if a.sum() == 0 or b.sum() == 0:
        diagonal = float(np.sqrt((((np.array(a.shape) - 1) * sp) ** 2).sum()))
        return Hd95Result(diagonal, True)

    pa = boundary_points(a) * sp
    pb = boundary_points(b) * sp
    d = cdist(pa, pb)
    pooled = np.concatenate([d.min(axis=1), d.min(axis=0)])
    return Hd95Result(float(np.percentile(pooled, 95)), False)


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass
class CaseClassMetrics:
    case_id: str
    class_id: int
    dsc: float
    hd95: float
    recall: float
    precision: float
    empty_flag: bool = False


@dataclass
class MetricReport:
    """Per-case, per-class metrics plus dataset means."""

    rows: list[CaseClassMetrics] = field(default_factory=list)

    def mean(self, attribute: str) -> float:
        if not self.rows:
            return math.nan
        return float(np.mean([getattr(r, attribute) for r in self.rows]))

    def class_mean_dsc(self) -> dict[int, float]:
        by_class: dict[int, list[float]] = {}
        for r in self.rows:
            by_class.setdefault(r.class_id, []).append(r.dsc)
        return {c: float(np.mean(v)) for c, v in sorted(by_class.items())}

    def to_text(self) -> str:
        lines = ["case\tclass\tdsc\thd95\trecall\tprecision\tempty_flag"]
        for r in self.rows:
            lines.append(
                f"{r.case_id}\t{r.class_id}\t{r.dsc:.6f}\t{r.hd95:.6f}"
                f"\t{r.recall:.6f}\t{r.precision:.6f}\t{int(r.empty_flag)}"
            )
        lines.append(
            f"mean\tall\t{self.mean('dsc'):.6f}\t{self.mean('hd95'):.6f}"
            f"\t{self.mean('recall'):.6f}\t{self.mean('precision'):.6f}\t-"
        )
        per_class = "\t".join(
            f"dsc_class_{c}={v:.6f}" for c, v in self.class_mean_dsc().items()
        )
        lines.append(
            f"# summary\tdsc_mean={self.mean('dsc'):.6f}"
            f"\thd95_mean={self.mean('hd95'):.6f}\t{per_class}"
        )
        return "\n".join(lines) + "\n"


def evaluate_case(
    case_id: str,
    pred_stack: np.ndarray,
    gt_stack: np.ndarray,
    n_classes: int,
    spacing: Sequence[float] | None = None,
) -> list[CaseClassMetrics]:
    """Per-class metrics over one case's stacked (D, H, W) label volumes."""
    if pred_stack.shape != gt_stack.shape:
        raise ValueError(f"shape mismatch: {pred_stack.shape} vs {gt_stack.shape}")
    rows = []
    for c in range(1, n_classes):
        pred = pred_stack == c
        gt = gt_stack == c
        r, p = recall_precision(pred, gt)
        hd = hd95(pred, gt, spacing)
        rows.append(
            CaseClassMetrics(
                case_id=case_id,
                class_id=c,
                dsc=dsc(pred, gt),
                hd95=hd.value,
                recall=r,
                precision=p,
                empty_flag=hd.empty_penalty,
            )
        )
    return rows
