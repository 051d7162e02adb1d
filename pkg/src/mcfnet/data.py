"""Volume ingestion, slice normalization, case splits, and synthetic data.

The on-disk dataset layout produced by :func:`save_dataset` (and consumed by
the trainer) is::

    <root>/manifest.tsv          # case id, partition, slice count (+ header)
    <root>/images/<case>_<idx>.png   # 16-bit grayscale, intensity in [0, 1]
    <root>/masks/<case>_<idx>.png    # 8-bit integer class labels

Loading and preprocessing are pure per-case functions; only manifest creation
orders cases globally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .nifti import read_nifti
from .resize import bilinear_resize_np, nearest_resize_np

MODALITIES = ("CT", "MR", "PET")


@dataclass
class Volume:
    """A 3D scalar image with per-axis physical spacing in mm."""

    voxels: np.ndarray  # (depth, height, width)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    modality: str = "CT"

    def __post_init__(self) -> None:
        self.voxels = np.asarray(self.voxels)
        if self.voxels.ndim != 3 or min(self.voxels.shape) < 1:
            raise ValueError(f"volume must be 3D with positive dims, got {self.voxels.shape}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive values, got {self.spacing}")
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape


@dataclass
class SliceSample:
    """One normalized 2D training sample: image in [0, 1] plus a label mask."""

    image: np.ndarray  # (H, W) float32 in [0, 1]
    mask: np.ndarray  # (H, W) integer labels
    case_id: str
    index: int

    def __post_init__(self) -> None:
        self.image = np.asarray(self.image, dtype=np.float32)
        self.mask = np.asarray(self.mask)
        if self.image.shape != self.mask.shape:
            raise ValueError(
                f"image {self.image.shape} and mask {self.mask.shape} shapes differ"
            )
        if self.image.size and (self.image.min() < 0.0 or self.image.max() > 1.0):
            raise ValueError("image intensities must lie in [0, 1]")
        if self.mask.size and self.mask.min() < 0:
            raise ValueError("mask labels must be non-negative")


@dataclass(frozen=True)
class SplitManifest:
    """Case-level train/test partition. Cases never straddle partitions."""

    train: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if set(self.train) & set(self.test):
            raise ValueError("train and test partitions overlap")

    def partition_of(self, case_id: str) -> str:
        if case_id in self.train:
            return "train"
        if case_id in self.test:
            return "test"
        raise KeyError(case_id)


@dataclass(frozen=True)
class ClassOrder:
    """Ordered foreground class names; name k maps to integer label k+1.

    Background is always label 0 and carries no name.
    """

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")

    def label_of(self, name: str) -> int:
        return self.names.index(name) + 1


@dataclass
class NormalizeConfig:
    """Slice normalization settings.

    CT uses a fixed window (level/width in HU) then min-max over the window;
    MR/PET clip per slice at the given percentiles then min-max. Constant
    slices normalize to all zeros.
    """

    out_size: int = 256
    ct_window_level: float = 40.0
    ct_window_width: float = 400.0
    percentile_low: float = 0.5
    percentile_high: float = 99.5
    foreground_only: bool = True


def load_volume(path: str | Path, modality: str = "CT") -> Volume:
    """Load a NIfTI file (.nii/.nii.gz) or a directory of same-size PNG slices.

    PNG directories get default 1 mm spacing; NIfTI spacing comes from the
    header, reordered to (depth, height, width).
    """
    path = Path(path)
    if path.is_dir():
        slices = []
        names = sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
        if not names:
            raise ValueError(f"{path}: no PNG slices found")
        for p in names:
            arr = np.asarray(Image.open(p))
            if arr.ndim == 3:  # RGB -> grayscale
                arr = arr.mean(axis=2)
            if slices and arr.shape != slices[0].shape:
                raise ValueError(
                    f"{p.name}: slice shape {arr.shape} differs from {slices[0].shape}"
                )
            slices.append(arr)
        return Volume(np.stack(slices), (1.0, 1.0, 1.0), modality)
    if path.name.endswith((".nii", ".nii.gz")):
        voxels, spacing = read_nifti(path)
        return Volume(voxels, spacing, modality)
    raise ValueError(f"{path}: expected .nii/.nii.gz or a PNG directory")


def merge_labels(label_volumes: Sequence[Volume], order: ClassOrder) -> Volume:
    """Merge per-structure binary volumes into one integer label volume.

    Voxels of the k-th volume (in ``order``) get label k+1; on overlap the
    later class in the order wins.
    """
    if len(label_volumes) != len(order.names):
        raise ValueError(
            f"{len(label_volumes)} volumes for {len(order.names)} class names"
        )
    base = label_volumes[0]
    merged = np.zeros(base.shape, dtype=np.int16)
    for k, vol in enumerate(label_volumes):
        if vol.shape != base.shape:
            raise ValueError(f"label volume {k} shape {vol.shape} != {base.shape}")
        binary = vol.voxels
        if not np.isin(binary, (0, 1)).all():
            raise ValueError(f"label volume {k} is not binary")
        merged[binary == 1] = k + 1
    return Volume(merged, base.spacing, base.modality)


def _normalize_slice(img: np.ndarray, modality: str, cfg: NormalizeConfig) -> np.ndarray:
    img = img.astype(np.float64)
    if modality == "CT":
        lo = cfg.ct_window_level - cfg.ct_window_width / 2.0
        hi = cfg.ct_window_level + cfg.ct_window_width / 2.0
    else:
        lo = np.percentile(img, cfg.percentile_low)
        hi = np.percentile(img, cfg.percentile_high)
    if hi <= lo:
        return np.zeros_like(img, dtype=np.float32)
    out = (np.clip(img, lo, hi) - lo) / (hi - lo)
    return out.astype(np.float32)


def slice_and_normalize(
    volume: Volume,
    labels: Volume,
    cfg: NormalizeConfig | None = None,
    case_id: str = "case",
) -> list[SliceSample]:
    """Extract axial slices, normalize intensities, and resize to out_size.

    Images are resized bilinearly, masks with nearest-neighbor so no new
    labels appear. Background-only slices are dropped when
    ``cfg.foreground_only`` is set.
    """
    cfg = cfg or NormalizeConfig()
    if volume.shape != labels.shape:
        raise ValueError(f"volume {volume.shape} and labels {labels.shape} shapes differ")
    size = (cfg.out_size, cfg.out_size)
    samples = []
    for d in range(volume.shape[0]):
        mask = nearest_resize_np(labels.voxels[d].astype(np.int16), size)
        if cfg.foreground_only and mask.max() <= 0:
            continue
        img = _normalize_slice(volume.voxels[d], volume.modality, cfg)
        img = np.clip(bilinear_resize_np(img, size), 0.0, 1.0)
        samples.append(SliceSample(img, mask, case_id, d))
    return samples


def make_split(case_ids: Sequence[str], train_fraction: float, seed: int) -> SplitManifest:
    """Deterministically partition cases into train/test by shuffled order."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    cases = list(case_ids)
    if len(cases) < 2:
        raise ValueError("need at least 2 cases to split")
    rng = np.random.default_rng(seed)
    order = [cases[i] for i in rng.permutation(len(cases))]
    n_train = int(round(train_fraction * len(cases)))
    n_train = min(max(n_train, 1), len(cases) - 1)
    return SplitManifest(tuple(order[:n_train]), tuple(order[n_train:]), seed)


def synth_dataset(
    n_cases: int,
    classes: int,
    image_size: int,
    seed: int,
) -> list[SliceSample]:
    """Generate one synthetic sample per case: non-overlapping shapes on a
    dim background, one shape class per foreground label (odd labels are
    ellipses, even labels rectangles). Masks agree exactly with the rendered
    shape geometry; intensities carry a small seeded noise floor.
    """
    if classes < 2:
        raise ValueError("need background plus at least one shape class")
    rng = np.random.default_rng(seed)
    intensities = np.linspace(0.45, 0.95, classes - 1)
    samples = []
    for c in range(n_cases):
        image = np.full((image_size, image_size), 0.12, dtype=np.float64)
        mask = np.zeros((image_size, image_size), dtype=np.uint8)
        occupied = np.zeros_like(mask, dtype=bool)
        yy, xx = np.mgrid[0:image_size, 0:image_size]
        for label in range(1, classes):
            placed = False
            for _ in range(200):
                ry = rng.uniform(0.06, 0.18) * image_size
                rx = rng.uniform(0.06, 0.18) * image_size
                ry, rx = max(ry, 2.0), max(rx, 2.0)
                cy = rng.uniform(ry + 1, image_size - ry - 1) if image_size > 2 * ry + 2 else -1
                cx = rng.uniform(rx + 1, image_size - rx - 1) if image_size > 2 * rx + 2 else -1
                if cy < 0 or cx < 0:
                    continue
                if label % 2 == 1:  # ellipse
                    region = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
                else:  # rectangle
                    region = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
                grown = _dilate(region)
                if not (grown & occupied).any():
                    mask[region] = label
                    image[region] = intensities[label - 1]
                    occupied |= grown
                    placed = True
                    break
            if not placed:
                raise ValueError(
                    f"image size {image_size} too small to place {classes - 1} shapes"
                )
        image = image + rng.normal(0.0, 0.02, image.shape)
        image = np.clip(image, 0.0, 1.0).astype(np.float32)
        samples.append(SliceSample(image, mask, f"case_{c:03d}", 0))
    return samples


def _dilate(region: np.ndarray) -> np.ndarray:
    """Grow a boolean region by one pixel (4-neighborhood), used as a margin."""
    out = region.copy()
    out[1:, :] |= region[:-1, :]
    out[:-1, :] |= region[1:, :]
    out[:, 1:] |= region[:, :-1]
    out[:, :-1] |= region[:, 1:]
    return out


# ---------------------------------------------------------------------------
# Dataset directory I/O
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.tsv"


@dataclass
class DatasetMeta:
    classes: int
    image_size: int
    seed: int
    cases: dict[str, str] = field(default_factory=dict)  # case id -> partition


def save_dataset(
    samples: Sequence[SliceSample],
    split: SplitManifest,
    out_dir: str | Path,
    classes: int,
) -> Path:
    """Write samples plus a manifest to ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    image_size = samples[0].image.shape[0] if samples else 0
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.case_id] = counts.get(s.case_id, 0) + 1
        stem = f"{s.case_id}_{s.index:04d}.png"
        img16 = np.round(s.image.astype(np.float64) * 65535.0).astype(np.uint16)
        Image.fromarray(img16).save(out_dir / "images" / stem)
        Image.fromarray(s.mask.astype(np.uint8)).save(out_dir / "masks" / stem)

    lines = [
        "# mcfnet-dataset\tv1",
        f"# seed\t{split.seed}",
        f"# classes\t{classes}",
        f"# image_size\t{image_size}",
        "case\tpartition\tslices",
    ]
    for case in sorted(counts):
        lines.append(f"{case}\t{split.partition_of(case)}\t{counts[case]}")
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_dataset(
    root: str | Path, partition: str = "all"
) -> tuple[list[SliceSample], DatasetMeta]:
    """Load samples from a dataset directory, optionally filtered by partition."""
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise FileNotFoundError(f"{manifest} not found")
    meta = DatasetMeta(classes=0, image_size=0, seed=0)
    header_seen = False
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        fields = line.split("\t")
        if line.startswith("#"):
            key = fields[0].lstrip("# ").strip()
            if key == "seed":
                meta.seed = int(fields[1])
            elif key == "classes":
                meta.classes = int(fields[1])
            elif key == "image_size":
                meta.image_size = int(fields[1])
            continue
        if fields[0] == "case":
            header_seen = True
            continue
        if len(fields) != 3:
            raise ValueError(f"malformed manifest line: {line!r}")
        meta.cases[fields[0]] = fields[1]
    if not header_seen or meta.classes < 2:
        raise ValueError(f"{manifest}: missing header or class count")

    samples = []
    wanted = {c for c, p in meta.cases.items() if partition in ("all", p)}
    for img_path in sorted((root / "images").iterdir()):
        case_id, idx = img_path.stem.rsplit("_", 1)
        if case_id not in wanted:
            continue
        img = np.asarray(Image.open(img_path), dtype=np.float64) / 65535.0
        mask = np.asarray(Image.open(root / "masks" / img_path.name))
        samples.append(SliceSample(img.astype(np.float32), mask, case_id, int(idx)))
    return samples, meta
