"""Point-cloud file formats.

CSV: one row per point, no header, decimal floats.
Binary: little-endian ``u32 n, u32 d`` header followed by ``n*d`` float64 values
in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .measure import PointCloud, as_cloud

_HEADER = struct.Struct("<II")


def read_csv(path) -> PointCloud:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ValueError(f"{path}: no points")
    return PointCloud(np.array(rows, dtype=np.float64))


def write_csv(path, cloud) -> None:
    pts = as_cloud(cloud).points
    with open(path, "w") as fh:
        for row in pts:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_binary(path) -> PointCloud:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    n, d = _HEADER.unpack_from(data)
    expected = _HEADER.size + 8 * n * d
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for n={n}, d={d}, got {len(data)}")
    pts = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=n * d)
    return PointCloud(pts.reshape(n, d))


def write_binary(path, cloud) -> None:
    pts = as_cloud(cloud).points
    n, d = pts.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(n, d))
        fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())


def read_points(path) -> PointCloud:
    """Dispatch on extension: ``.csv``/``.txt`` are text, anything else binary."""
    suffix = Path(path).suffix.lower()
    if suffix in (".csv", ".txt"):
        return read_csv(path)
    return read_binary(path)
