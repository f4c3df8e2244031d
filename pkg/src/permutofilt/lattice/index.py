"""Hash-keyed dense index over populated lattice vertices."""

from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt

from permutofilt.errors import EmptyInputError, ShapeMismatchError
from permutofilt.lattice.core import IntArray, SimplexBatch

logger = logging.getLogger(__name__)

MISSING = -1

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)
_SHIFT = np.uint64(29)


def mix_keys(keys: npt.ArrayLike) -> npt.NDArray[np.uint64]:
    """64-bit mixing hash over the last axis of an integer key array."""
    k = np.asarray(keys, dtype=np.int64)
    h = np.full(k.shape[:-1], _FNV_OFFSET, dtype=np.uint64)
    for i in range(k.shape[-1]):
        h ^= k[..., i].astype(np.uint64)
        h *= _FNV_PRIME
        h ^= h >> _SHIFT
    return h


class LatticeIndex:
    """Bijection between stored vertex keys and dense indices ``0..m-1``.

    Lookups hash the query key, binary-search the sorted hash table and confirm the hit by
    comparing the full key, so colliding hashes never alias two vertices.
    """

    def __init__(self, keys: npt.ArrayLike):
        stored = np.ascontiguousarray(np.asarray(keys, dtype=np.int64))
        if stored.ndim != 2 or stored.shape[1] < 2:
            raise ShapeMismatchError(f"keys must have shape (m, d+1), got {stored.shape}")
        self.keys: IntArray = stored
        self.keys.setflags(write=False)
        hashes = mix_keys(stored)
        self._order = np.argsort(hashes, kind="stable")
        self._sorted = hashes[self._order]
        self._has_collisions = bool(np.any(self._sorted[1:] == self._sorted[:-1]))
        if self._has_collisions:
            logger.debug("lattice index holds colliding hashes, exact fallback enabled")

    @classmethod
    def from_keys(cls, keys: npt.ArrayLike) -> LatticeIndex:
        """Build an index over the distinct keys, numbered by first appearance."""
        flat = np.asarray(keys, dtype=np.int64)
        flat = flat.reshape(-1, flat.shape[-1])
        if flat.shape[0] == 0:
            raise EmptyInputError("cannot index an empty key set")
        _, first = np.unique(flat, axis=0, return_index=True)
        return cls(flat[np.sort(first)])

    @property
    def m(self) -> int:
        return int(self.keys.shape[0])

    @property
    def d(self) -> int:
        return int(self.keys.shape[1]) - 1

    def __len__(self) -> int:
        return self.m

    def lookup(self, queries: npt.ArrayLike) -> IntArray:
        """Dense index of every query key (last axis), ``MISSING`` where unpopulated."""
        q = np.asarray(queries, dtype=np.int64)
        if q.shape[-1] != self.keys.shape[1]:
            raise ShapeMismatchError(
                f"query keys have {q.shape[-1]} coords, index stores {self.keys.shape[1]}"
            )
        shape = q.shape[:-1]
        flat = q.reshape(-1, q.shape[-1])
        qh = mix_keys(flat)
        pos = np.minimum(np.searchsorted(self._sorted, qh), self.m - 1)
        candidate = self._order[pos]
        same_hash = self._sorted[pos] == qh
        hit = same_hash & np.all(self.keys[candidate] == flat, axis=1)
        result = np.where(hit, candidate, MISSING)
        if self._has_collisions:
            for i in np.flatnonzero(same_hash & ~hit):
                result[i] = self._scan(int(pos[i]), flat[i])
        return result.reshape(shape)

    def _scan(self, start: int, key: IntArray) -> int:
        target = self._sorted[start]
        p = start
        while p < self.m and self._sorted[p] == target:
            candidate = int(self._order[p])
            if np.array_equal(self.keys[candidate], key):
                return candidate
            p += 1
        return MISSING


def build_index(enclosures: SimplexBatch) -> LatticeIndex:
    """Index every vertex touched by ``enclosures``; ``m <= n * (d + 1)``."""
    if len(enclosures) == 0:
        raise EmptyInputError("build_index needs at least one enclosure")
    index = LatticeIndex.from_keys(enclosures.vertices)
    logger.debug("indexed %d lattice vertices from %d points", index.m, len(enclosures))
    return index
