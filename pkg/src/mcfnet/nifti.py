"""Minimal NIfTI-1 volume I/O (.nii and .nii.gz).

Covers the subset of the format needed here: single-file images, the common
scalar dtypes, pixdim spacing, and scl_slope/scl_inter rescaling. Arrays are
returned in (depth, height, width) axis order, i.e. the reverse of the
on-disk (x, y, z) Fortran layout.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

HEADER_SIZE = 348

# NIfTI datatype code -> numpy dtype
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


class NiftiError(ValueError):
    """Raised for unreadable or unsupported NIfTI files."""


def _open_maybe_gz(path: Path, mode: str):
    if path.name.endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_nifti(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read a 3D NIfTI-1 file.

    Returns ``(voxels, spacing)`` where voxels has shape (depth, height, width)
    and spacing is the per-axis physical size in the same (d, h, w) order.
    """
    path = Path(path)
    with _open_maybe_gz(path, "rb") as f:
        header = f.read(HEADER_SIZE)
        if len(header) < HEADER_SIZE:
            raise NiftiError(f"{path}: truncated header")
        endian = "<"
        (sizeof_hdr,) = struct.unpack(endian + "i", header[:4])
        if sizeof_hdr != HEADER_SIZE:
            endian = ">"
            (sizeof_hdr,) = struct.unpack(endian + "i", header[:4])
            if sizeof_hdr != HEADER_SIZE:
                raise NiftiError(f"{path}: not a NIfTI-1 file")

        dim = struct.unpack(endian + "8h", header[40:56])
        datatype, _bitpix = struct.unpack(endian + "2h", header[70:74])
        pixdim = struct.unpack(endian + "8f", header[76:108])
        (vox_offset,) = struct.unpack(endian + "f", header[108:112])
        scl_slope, scl_inter = struct.unpack(endian + "2f", header[112:120])
        magic = header[344:348]
        if magic not in (b"n+1\x00", b"ni1\x00"):
            raise NiftiError(f"{path}: bad magic {magic!r}")

        ndim = dim[0]
        shape = [int(d) for d in dim[1 : 1 + ndim]]
        # Tolerate trailing singleton dims (e.g. 4D with one volume).
        while len(shape) > 3 and shape[-1] == 1:
            shape = shape[:-1]
        if len(shape) != 3 or any(s < 1 for s in shape):
            raise NiftiError(f"{path}: expected a 3D volume, got dims {shape}")
        if datatype not in _DTYPES:
            raise NiftiError(f"{path}: unsupported datatype code {datatype}")

        dtype = np.dtype(_DTYPES[datatype]).newbyteorder(endian)
        n_vox = int(np.prod(shape))
        f.seek(int(vox_offset))
        raw = f.read(n_vox * dtype.itemsize)
        if len(raw) < n_vox * dtype.itemsize:
            raise NiftiError(f"{path}: truncated voxel data")

    data = np.frombuffer(raw, dtype=dtype).reshape(shape, order="F")
    data = np.asarray(data, dtype=data.dtype.newbyteorder("="))
    if scl_slope not in (0.0, 1.0) or (scl_slope != 0.0 and scl_inter != 0.0):
        data = data.astype(np.float32) * scl_slope + scl_inter

    # (x, y, z) -> (z, y, x) = (depth, height, width)
    voxels = np.ascontiguousarray(np.transpose(data, (2, 1, 0)))
    spacing = (float(pixdim[3]), float(pixdim[2]), float(pixdim[1]))
    return voxels, spacing


def write_nifti(
    path: str | Path,
    voxels: np.ndarray,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> None:
    """Write a (depth, height, width) array as a NIfTI-1 single file."""
    path = Path(path)
    voxels = np.asarray(voxels)
    if voxels.ndim != 3:
        raise NiftiError(f"expected a 3D array, got shape {voxels.shape}")
    if voxels.dtype not in _DTYPE_CODES:
        voxels = voxels.astype(np.float32)
    datatype = _DTYPE_CODES[np.dtype(voxels.dtype)]

    data = np.transpose(voxels, (2, 1, 0))  # back to (x, y, z)
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, datatype, voxels.dtype.itemsize * 8)
    struct.pack_into(
        "<8f", header, 76, 1.0, spacing[2], spacing[1], spacing[0], 1.0, 1.0, 1.0, 1.0
    )
    struct.pack_into("<f", header, 108, 352.0)  # vox_offset
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # scl_slope, scl_inter
    header[344:348] = b"n+1\x00"

    with _open_maybe_gz(path, "wb") as f:
        f.write(bytes(header))
        f.write(b"\x00" * 4)  # extension flag
        f.write(np.asfortranarray(data).tobytes(order="F"))
