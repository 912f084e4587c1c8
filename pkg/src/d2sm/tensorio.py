"""Binary tensor files.

Layout (all little-endian)::

    b"D2TN" | version u8 (=1) | rank u8 | dims: rank x u32 | payload: float32, row-major

Images are stored as rank-3 (H, W, C), feature batches as rank-2 (n, d) and
image batches as rank-4 (n, H, W, C).
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"D2TN"
VERSION = 1


class TensorFormatError(ValueError):
    """Raised for malformed tensor files (bad magic, version or length)."""


def write_tensor(tensor, path):
    arr = np.asarray(tensor)
    if arr.ndim == 0 or arr.ndim > 255:
        raise ValueError(f"unsupported rank {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"refusing to write non-finite values to {path}")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<BB", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write tensor file {path}: {exc}") from exc


def read_tensor(path):
    """Read a tensor file; returns a float32 array with the stored dims."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read tensor file {path}: {exc}") from exc
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic")
    version, rank = struct.unpack_from("<BB", raw, 4)
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    off = 6 + 4 * rank
    if len(raw) < off:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", raw, 6)
    expected = 4 * int(np.prod(dims, dtype=np.int64))
    if len(raw) - off != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(raw) - off} bytes, header declares {expected}")
    return np.frombuffer(raw, dtype="<f4", offset=off).astype(np.float32).reshape(dims)
