"""Learnable lattice filter banks and their PBF1 serialization."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from permutofilt.errors import FormatError, ParameterError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray, filter_size, offset_norms

PBF_MAGIC = b"PBF1"
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class FilterBank:
    """Filter taps ``weights[c_out, c_in, k]`` over the canonical s-hop neighborhood.

    A scalar bank (1 x 1 x t) filters every channel of a signal independently.
    """

    weights: FloatArray
    d: int
    s: int

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 3:
            raise ShapeMismatchError(f"filter weights must be 3-D (c_out, c_in, t), got {w.shape}")
        t = filter_size(self.d, self.s)
        if w.shape[2] != t:
            raise ShapeMismatchError(
                f"filter for d={self.d}, s={self.s} needs {t} taps, got {w.shape[2]}"
            )
        if not np.all(np.isfinite(w)):
            raise ParameterError("filter weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def c_out(self) -> int:
        return int(self.weights.shape[0])

    @property
    def c_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def t(self) -> int:
        return int(self.weights.shape[2])

    @property
    def is_scalar(self) -> bool:
        return self.c_out == 1 and self.c_in == 1

    def with_weights(self, weights: npt.ArrayLike) -> FilterBank:
        w = np.asarray(weights, dtype=np.float64).reshape(self.weights.shape)
        return FilterBank(weights=w, d=self.d, s=self.s)

    @classmethod
    def zeros(cls, d: int, s: int, c_out: int = 1, c_in: int = 1) -> FilterBank:
        return cls(weights=np.zeros((c_out, c_in, filter_size(d, s))), d=d, s=s)

    @classmethod
    def identity(cls, d: int, s: int, channels: int = 1) -> FilterBank:
        """Center-only identity: ``weights[c][c][0] = 1``, every other tap 0."""
        w = np.zeros((channels, channels, filter_size(d, s)))
        w[np.arange(channels), np.arange(channels), 0] = 1.0
        return cls(weights=w, d=d, s=s)

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(PBF_MAGIC, self.d, self.s, self.c_out, self.c_in)
        return header + self.weights.astype("<f4").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> FilterBank:
        if len(data) < _HEADER.size:
            raise FormatError(f"PBF1 data too short: {len(data)} bytes")
        magic, d, s, c_out, c_in = _HEADER.unpack_from(data)
        if magic != PBF_MAGIC:
            raise FormatError(f"bad filter magic {magic!r}, expected {PBF_MAGIC!r}")
        t = filter_size(d, s)
        expected = _HEADER.size + 4 * c_out * c_in * t
        if len(data) != expected:
            raise FormatError(f"PBF1 payload is {len(data)} bytes, expected {expected}")
        w = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
        return cls(weights=w.reshape(c_out, c_in, t), d=d, s=s)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> FilterBank:
        return cls.from_bytes(Path(path).read_bytes())


def gaussian_init(d: int, s: int, sigma: float) -> FilterBank:
    """Scalar bank with taps ``exp(-|offset|^2 / (2 sigma^2))`` normalized to sum 1.

    ``sigma`` is measured in lattice hops (nearest-neighbor distances).
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    r = offset_norms(d, s)
    w = np.exp(-(r**2) / (2.0 * sigma**2))
    w /= w.sum()
    return FilterBank(weights=w.reshape(1, 1, -1), d=d, s=s)
