"""Lattice geometry and vertex indexing."""

from permutofilt.lattice.core import (
    LatticeKey,
    SimplexBatch,
    SimplexEnclosure,
    embed,
    enumerate_neighbors,
    filter_size,
    find_simplex,
    find_simplices,
    hop_vectors,
    mirror_taps,
    neighbor_offsets,
    offset_norms,
    unit_hops,
)
from permutofilt.lattice.index import MISSING, LatticeIndex, build_index

__all__ = [
    "MISSING",
    "LatticeIndex",
    "LatticeKey",
    "SimplexBatch",
    "SimplexEnclosure",
    "build_index",
    "embed",
    "enumerate_neighbors",
    "filter_size",
    "find_simplex",
    "find_simplices",
    "hop_vectors",
    "mirror_taps",
    "neighbor_offsets",
    "offset_norms",
    "unit_hops",
]
