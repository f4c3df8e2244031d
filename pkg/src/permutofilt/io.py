"""File formats: unaries, point-cloud CSV, segment maps and ASCII PNM rasters."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image

from permutofilt.errors import FormatError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray, IntArray

logger = logging.getLogger(__name__)

_UNARY_HEADER = struct.Struct("<II")


def write_unaries(path: str | Path, unaries: npt.ArrayLike) -> None:
    """Header ``u32 n, u32 L`` then ``n * L`` little-endian f32 values, row-major."""
    u = np.asarray(unaries, dtype=np.float64)
    if u.ndim != 2:
        raise ShapeMismatchError(f"unaries must be (n, L), got {u.shape}")
    data = _UNARY_HEADER.pack(*u.shape) + u.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(data)


def read_unaries(path: str | Path) -> FloatArray:
    data = Path(path).read_bytes()
    if len(data) < _UNARY_HEADER.size:
        raise FormatError(f"{path}: unaries file too short ({len(data)} bytes)")
    n, labels = _UNARY_HEADER.unpack_from(data)
    expected = _UNARY_HEADER.size + 4 * n * labels
    if len(data) != expected:
        raise FormatError(f"{path}: unaries payload is {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=_UNARY_HEADER.size).astype(np.float64)
    return values.reshape(n, labels)


@dataclass(frozen=True)
class PointCloudSignal:
    """Per-point values (n, c) over precomputed features (n, d)."""

    values: FloatArray
    features: FloatArray

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.features.ndim != 2:
            raise ShapeMismatchError("point-cloud values and features must both be 2-D")
        if self.values.shape[0] != self.features.shape[0]:
            raise ShapeMismatchError(
                f"{self.values.shape[0]} values but {self.features.shape[0]} feature rows"
            )


def read_point_cloud(path: str | Path) -> PointCloudSignal:
    """CSV with a header naming ``value_0..value_{c-1}`` and ``feat_0..feat_{d-1}`` columns."""
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
    value_cols = [i for i, h in enumerate(header) if h.startswith("value_")]
    feat_cols = [i for i, h in enumerate(header) if h.startswith("feat_")]
    if not value_cols or not feat_cols:
        raise FormatError(f"{p}: header needs value_* and feat_* columns, got {header}")
    value_cols.sort(key=lambda i: int(header[i].split("_", 1)[1]))
    feat_cols.sort(key=lambda i: int(header[i].split("_", 1)[1]))
    try:
        table = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{p}: {e}") from None
    if table.shape[1] != len(header):
        raise FormatError(f"{p}: rows have {table.shape[1]} columns, header has {len(header)}")
    return PointCloudSignal(values=table[:, value_cols], features=table[:, feat_cols])


def write_point_cloud(
    path: str | Path, values: npt.ArrayLike, features: npt.ArrayLike | None = None
) -> None:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, np.newaxis]
    columns = [f"value_{i}" for i in range(v.shape[1])]
    table = v
    if features is not None:
        f = np.asarray(features, dtype=np.float64)
        columns += [f"feat_{j}" for j in range(f.shape[1])]
        table = np.hstack([v, f])
    np.savetxt(path, table, delimiter=",", header=",".join(columns), comments="", fmt="%.10g")


def read_segment_map(path: str | Path) -> IntArray:
    """Segment ids from an integer raster (PGM/PNG) as (h, w), or from a CSV as (n,).

    CSV rows are either ``segment`` or ``point,segment``; a non-numeric first row is a header.
    """
    p = Path(path)
    if p.suffix.lower() == ".csv":
        lines = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if lines and not lines[0].replace(",", "").replace("-", "").strip().isdigit():
            lines = lines[1:]
        try:
            rows = [[int(c) for c in ln.split(",")] for ln in lines]
        except ValueError as e:
            raise FormatError(f"{p}: {e}") from None
        if not rows:
            raise FormatError(f"{p}: no segment rows")
        if len(rows[0]) == 1:
            return np.asarray([r[0] for r in rows], dtype=np.int64)
        ids = np.empty(len(rows), dtype=np.int64)
        for point, segment in rows:
            if not 0 <= point < len(rows):
                raise FormatError(f"{p}: point index {point} out of range")
            ids[point] = segment
        return ids
    with Image.open(p) as img:
        return np.asarray(img, dtype=np.int64)


def write_pnm_ascii(path: str | Path, pixels: npt.ArrayLike, maxval: int = 255) -> None:
    """Write (h, w) as plain PGM (P2) or (h, w, 3) as plain PPM (P3)."""
    a = np.asarray(pixels)
    if a.ndim == 2:
        magic, h, w = "P2", a.shape[0], a.shape[1]
    elif a.ndim == 3 and a.shape[2] == 3:
        magic, h, w = "P3", a.shape[0], a.shape[1]
    else:
        raise ShapeMismatchError(f"PNM needs (h, w) or (h, w, 3) pixels, got {a.shape}")
    rows = a.reshape(h, -1).astype(np.int64)
    body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows)
    Path(path).write_text(f"{magic}\n{w} {h}\n{maxval}\n{body}\n", encoding="ascii")
    logger.debug("wrote %s %dx%d to %s", magic, w, h, path)


def write_label_map(path: str | Path, labels: npt.ArrayLike, width: int, height: int) -> None:
    """Per-pixel labels as ``point,label`` CSV, plain PGM (``.pgm``/``.pnm``) or 8-bit PNG."""
    p = Path(path)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.size != width * height:
        raise ShapeMismatchError(f"{y.size} labels for a {width}x{height} image")
    if p.suffix.lower() == ".csv":
        table = np.stack([np.arange(y.size), y], axis=1)
        np.savetxt(p, table, delimiter=",", header="point,label", comments="", fmt="%d")
        return
    if y.min() < 0 or y.max() > 255:
        raise FormatError(f"{p}: raster label maps hold labels 0..255, got {y.min()}..{y.max()}")
    grid = y.reshape(height, width)
    if p.suffix.lower() in (".pgm", ".pnm"):
        write_pnm_ascii(p, grid)
    else:
        Image.fromarray(grid.astype(np.uint8)).save(p)
