"""Bilinear and nearest-neighbor resizing with a pinned coordinate convention.

Every output pixel (y, x) samples the source at

    sy = (y + 0.5) * H_src / H_out - 0.5
    sx = (x + 0.5) * W_src / W_out - 0.5

(the align-corners=false mapping), clamped to the source extent. The value is
the convex combination of the four nearest source pixels weighted by the
fractional offsets, so resizing to the source size is an exact identity and
outputs are always bounded by the source min/max. The same mapping drives the
nearest-neighbor variant used for label masks.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import Tensor


def _source_coords(out_size: int, src_size: int, device, dtype) -> tuple[Tensor, Tensor, Tensor]:
    """Return (low index, high index, fractional weight) for one axis."""
    out = torch.arange(out_size, device=device, dtype=dtype)
    src = (out + 0.5) * (src_size / out_size) - 0.5
    src = src.clamp(0.0, src_size - 1.0)
    lo = src.floor()
    frac = src - lo
    lo = lo.to(torch.long)
    hi = torch.clamp(lo + 1, max=src_size - 1)
    return lo, hi, frac


def bilinear_resize(img: Tensor, target: tuple[int, int]) -> Tensor:
    """Resize the trailing two dims of a (..., H, W) tensor to ``target``.

    Differentiable; accepts 2D, 3D (C, H, W) or 4D (B, C, H, W) inputs.
    """
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise ValueError(f"target size must be >= 1x1, got {target}")
    sh, sw = img.shape[-2], img.shape[-1]
    if (th, tw) == (sh, sw):
        return img

    dtype = img.dtype if img.dtype.is_floating_point else torch.float32
    x = img.to(dtype)
    y0, y1, fy = _source_coords(th, sh, img.device, dtype)
    x0, x1, fx = _source_coords(tw, sw, img.device, dtype)

    top = x[..., y0, :]
    bot = x[..., y1, :]
    tl, tr = top[..., x0], top[..., x1]
    bl, br = bot[..., x0], bot[..., x1]

    wy = fy.view(-1, 1)
    wx = fx.view(1, -1)
    out = (
        (1 - wy) * (1 - wx) * tl
        + (1 - wy) * wx * tr
        + wy * (1 - wx) * bl
        + wy * wx * br
    )
    return out


def bilinear_resize_np(img: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Numpy wrapper around :func:`bilinear_resize` for 2D arrays."""
    out = bilinear_resize(torch.from_numpy(np.ascontiguousarray(img)).double(), target)
    return out.numpy().astype(img.dtype, copy=False)


def nearest_resize_np(mask: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize for 2D label masks (never invents labels)."""
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise ValueError(f"target size must be >= 1x1, got {target}")
    sh, sw = mask.shape

    def axis_idx(out_size: int, src_size: int) -> np.ndarray:
        src = (np.arange(out_size) + 0.5) * (src_size / out_size) - 0.5
        return np.clip(np.round(src), 0, src_size - 1).astype(np.int64)

    yy = axis_idx(th, sh)
    xx = axis_idx(tw, sw)
    return mask[np.ix_(yy, xx)]
