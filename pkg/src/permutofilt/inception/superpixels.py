"""Segment-level pooling and broadcasting over precomputed superpixel maps."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from permutofilt.errors import EmptySegmentError, LabelOutOfRangeError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray, IntArray
from permutofilt.ops.permuto import as_2d


def check_segments(segment_map: npt.ArrayLike, n: int | None = None) -> tuple[IntArray, int]:
    """Flattened segment ids and the segment count ``M``; ids must cover ``0..M-1``."""
    seg = np.asarray(segment_map).reshape(-1)
    if seg.size == 0:
        raise EmptySegmentError("segment map is empty")
    if not np.issubdtype(seg.dtype, np.integer):
        raise LabelOutOfRangeError(f"segment ids must be integers, got dtype {seg.dtype}")
    if n is not None and seg.size != n:
        raise ShapeMismatchError(f"segment map covers {seg.size} points, signal has {n}")
    if seg.min() < 0:
        raise LabelOutOfRangeError(f"segment ids must be >= 0, got {seg.min()}")
    count = int(seg.max()) + 1
    sizes = np.bincount(seg, minlength=count)
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        raise EmptySegmentError(f"segment {int(empty[0])} owns no point ({empty.size} empty)")
    return seg.astype(np.int64), count


def segment_means(values: npt.ArrayLike, segments: IntArray, count: int) -> FloatArray:
    v = as_2d(values)
    sizes = np.bincount(segments, minlength=count).astype(np.float64)
    sums = np.zeros((count, v.shape[1]))
    np.add.at(sums, segments, v)
    return sums / sizes[:, np.newaxis]


def superpixel_reduce(
    values: npt.ArrayLike,
    segment_map: npt.ArrayLike,
    features: npt.ArrayLike | None = None,
) -> tuple[FloatArray, FloatArray | None]:
    """Per-segment mean of ``values`` and, when given, of ``features``."""
    v = as_2d(values)
    segments, count = check_segments(segment_map, v.shape[0])
    means = segment_means(v, segments, count)
    if features is None:
        return means, None
    f = as_2d(features)
    if f.shape[0] != v.shape[0]:
        raise ShapeMismatchError(f"{v.shape[0]} values but {f.shape[0]} feature vectors")
    return means, segment_means(f, segments, count)


def superpixel_expand(segment_values: npt.ArrayLike, segment_map: npt.ArrayLike) -> FloatArray:
    """Broadcast segment values back to every point of the segment."""
    sv = as_2d(segment_values)
    segments, count = check_segments(segment_map)
    if count > sv.shape[0]:
        raise ShapeMismatchError(f"segment map uses {count} segments, got {sv.shape[0]} values")
    return sv[segments]
