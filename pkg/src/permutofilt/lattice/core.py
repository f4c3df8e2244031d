"""Permutohedral lattice geometry.

Features ``f`` in R^d are elevated onto the hyperplane ``sum(y) = 0`` in R^(d+1). Lattice vertices
are integer points on that plane whose coordinates share one residue modulo ``d + 1`` (the
remainder of the vertex). Every elevated point lies in exactly one simplex spanned by ``d + 1``
vertices with remainders ``0..d``; ``find_simplices`` returns those vertices together with the
barycentric weights of the point, in O(d^2) per point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from permutofilt.errors import InvalidFeatureError, ParameterError, SizeOverflowError

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Largest filter that still fits int32 index tables and the u32 PBF1 header.
MAX_FILTER_SIZE = 2**31 - 1


@dataclass(frozen=True)
class LatticeKey:
    """Integer coordinates of one lattice vertex."""

    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coords) < 2:
            raise InvalidFeatureError(f"lattice key needs 2 or more coords, got {len(self.coords)}")
        if sum(self.coords) != 0:
            raise InvalidFeatureError(f"lattice key coords must sum to 0, got {sum(self.coords)}")
        period = len(self.coords)
        if len({c % period for c in self.coords}) != 1:
            raise InvalidFeatureError(f"lattice key coords must share one residue mod {period}")

    @property
    def d(self) -> int:
        return len(self.coords) - 1

    @property
    def remainder(self) -> int:
        return self.coords[0] % len(self.coords)

    def as_array(self) -> IntArray:
        return np.asarray(self.coords, dtype=np.int64)


@dataclass(frozen=True)
class SimplexEnclosure:
    """Enclosing simplex of one elevated point.

    Vertices are ordered by remainder: vertex ``k`` has remainder ``k``, so the vertex carrying
    the largest weight can sit at any position. A point that is itself a lattice vertex of
    remainder ``r`` gets weight 1 at position ``r``.
    """

    vertices: tuple[LatticeKey, ...]
    barycentric: tuple[float, ...]


@dataclass(frozen=True)
class SimplexBatch:
    """Enclosing simplices of ``n`` points in array form.

    ``vertices`` has shape (n, d+1, d+1): point, remainder, coordinate.
    ``barycentric`` has shape (n, d+1).
    """

    vertices: IntArray
    barycentric: FloatArray

    def __len__(self) -> int:
        return int(self.barycentric.shape[0])

    @property
    def d(self) -> int:
        return int(self.barycentric.shape[1]) - 1

    def enclosure(self, i: int) -> SimplexEnclosure:
        return SimplexEnclosure(
            vertices=tuple(LatticeKey(tuple(int(c) for c in v)) for v in self.vertices[i]),
            barycentric=tuple(float(b) for b in self.barycentric[i]),
        )


def _check_features(features: npt.ArrayLike) -> FloatArray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim not in (1, 2) or f.shape[-1] < 1:
        raise InvalidFeatureError(f"features must be (d,) or (n, d) with d >= 1, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidFeatureError("features contain non-finite values")
    return f


@lru_cache(maxsize=32)
def elevation_matrix(d: int) -> FloatArray:
    """Return the (d+1, d) matrix mapping features onto the zero-sum hyperplane.

    Column ``k`` is the k-th basis direction of the plane scaled by
    ``(d+1) * sqrt(2/3) / sqrt((k+1)(k+2))``; columns are mutually orthogonal, so distances in
    feature space are preserved up to the global factor ``(d+1) * sqrt(2/3)``.
    """
    if d < 1:
        raise InvalidFeatureError(f"feature dimension must be >= 1, got {d}")
    basis = np.zeros((d + 1, d), dtype=np.float64)
    basis[0, :] = 1.0
    for row in range(1, d + 1):
        basis[row, row - 1] = -float(row)
        basis[row, row:] = 1.0
    k = np.arange(d, dtype=np.float64)
    scale = (d + 1) * math.sqrt(2.0 / 3.0) / np.sqrt((k + 1.0) * (k + 2.0))
    matrix = basis * scale[np.newaxis, :]
    matrix.setflags(write=False)
    return matrix


def embed(features: npt.ArrayLike) -> FloatArray:
    """Elevate one feature vector (d,) or a batch (n, d) onto the lattice hyperplane."""
    f = _check_features(features)
    return f @ elevation_matrix(f.shape[-1]).T


@lru_cache(maxsize=32)
def _canonical_simplex(d: int) -> IntArray:
    # canonical[k, r]: coordinate offset of the remainder-k vertex for a coordinate of rank r
    canonical = np.empty((d + 1, d + 1), dtype=np.int64)
    for k in range(d + 1):
        canonical[k, : d + 1 - k] = k
        canonical[k, d + 1 - k :] = k - (d + 1)
    canonical.setflags(write=False)
    return canonical


def find_simplices(elevated: npt.ArrayLike) -> SimplexBatch:
    """Locate the enclosing simplex and barycentric weights of every elevated point."""
    pts = np.atleast_2d(np.asarray(elevated, dtype=np.float64))
    if not np.all(np.isfinite(pts)):
        raise InvalidFeatureError("elevated points contain non-finite values")
    n, dp1 = pts.shape
    d = dp1 - 1
    if d < 1:
        raise InvalidFeatureError(f"elevated points need at least 2 coords, got {dp1}")

    # nearest remainder-0 point, coordinate-wise
    scaled = pts / dp1
    up = np.ceil(scaled) * dp1
    down = np.floor(scaled) * dp1
    rem0 = np.where(up - pts < pts - down, up, down)
    coord_sum = np.rint(rem0.sum(axis=1) / dp1).astype(np.int64)

    # rank 0 is the coordinate with the largest residual; ties go to the lower index
    order = np.argsort(-(pts - rem0), axis=1, kind="stable")
    rank = np.empty((n, dp1), dtype=np.int64)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(dp1), (n, dp1)).copy(), axis=1)

    # repair the coordinate sum so the rounded point lies on the plane
    rank += coord_sum[:, np.newaxis]
    low = rank < 0
    high = rank > d
    rank[low] += dp1
    rem0[low] += dp1
    rank[high] -= dp1
    rem0[high] -= dp1

    residual = (pts - rem0) / dp1
    first = np.zeros((n, d + 2), dtype=np.float64)
    second = np.zeros((n, d + 2), dtype=np.float64)
    np.put_along_axis(first, d - rank, residual, axis=1)
    np.put_along_axis(second, d - rank + 1, residual, axis=1)
    bary = first - second
    bary[:, 0] += 1.0 + bary[:, d + 1]
    barycentric = np.clip(bary[:, :dp1], 0.0, 1.0)

    origin = np.rint(rem0).astype(np.int64)
    offsets = _canonical_simplex(d)[:, rank]  # (d+1, n, d+1)
    vertices = origin[:, np.newaxis, :] + offsets.transpose(1, 0, 2)
    return SimplexBatch(vertices=vertices, barycentric=barycentric)


def find_simplex(point: npt.ArrayLike) -> SimplexEnclosure:
    """Enclosing simplex of a single elevated point, vertices in remainder order."""
    p = np.asarray(point, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidFeatureError(f"expected a single elevated point, got shape {p.shape}")
    return find_simplices(p[np.newaxis, :]).enclosure(0)


def filter_size(d: int, s: int) -> int:
    """Number of vertices within ``s`` hops of a vertex: (s+1)^(d+1) - s^(d+1)."""
    if d < 1:
        raise InvalidFeatureError(f"feature dimension must be >= 1, got {d}")
    if s < 0:
        raise ParameterError(f"neighborhood size must be >= 0, got {s}")
    t = (s + 1) ** (d + 1) - s ** (d + 1)
    if t > MAX_FILTER_SIZE:
        raise SizeOverflowError(f"filter size for d={d}, s={s} is {t}, above {MAX_FILTER_SIZE}")
    return t


@lru_cache(maxsize=64)
def hop_vectors(d: int, s: int) -> IntArray:
    """Canonical hop vectors ``a`` in {0..s}^(d+1) with ``min(a) == 0``, lexicographic order.

    Row ``k`` names the k-th filter tap; row 0 is the center.
    """
    t = filter_size(d, s)
    rows = [a for a in itertools.product(range(s + 1), repeat=d + 1) if min(a) == 0]
    vectors = np.asarray(rows, dtype=np.int64).reshape(t, d + 1)
    vectors.setflags(write=False)
    return vectors


@lru_cache(maxsize=64)
def neighbor_offsets(d: int, s: int) -> IntArray:
    """Key offsets ``sum_k a_k * u_k`` of the canonical taps, ``u_k = (d+1) e_k - 1``."""
    a = hop_vectors(d, s)
    offsets = (d + 1) * a - a.sum(axis=1, keepdims=True)
    offsets.setflags(write=False)
    return offsets


@lru_cache(maxsize=64)
def mirror_taps(d: int, s: int) -> IntArray:
    """Index of the tap with the negated offset, for every canonical tap."""
    a = hop_vectors(d, s)
    mirrored = s - a
    mirrored -= mirrored.min(axis=1, keepdims=True)
    position = {tuple(int(v) for v in row): k for k, row in enumerate(a)}
    taps = np.asarray([position[tuple(int(v) for v in row)] for row in mirrored], dtype=np.int64)
    taps.setflags(write=False)
    return taps


def unit_hops(d: int) -> IntArray:
    """Key offsets of the vertices sharing a simplex with the origin (one hop away)."""
    offsets = neighbor_offsets(d, 1)
    return offsets[1:]


def enumerate_neighbors(key: LatticeKey, s: int) -> list[LatticeKey]:
    """All vertices within ``s`` hops of ``key`` in canonical tap order, center first."""
    keys = key.as_array()[np.newaxis, :] + neighbor_offsets(key.d, s)
    return [LatticeKey(tuple(int(c) for c in row)) for row in keys]


def offset_norms(d: int, s: int) -> FloatArray:
    """Euclidean length of every tap offset in units of the nearest-neighbor distance."""
    offsets = neighbor_offsets(d, s).astype(np.float64)
    return np.linalg.norm(offsets, axis=1) / math.sqrt(d * (d + 1))
