"""Pairwise message filters for mean-field inference.

``LatticeKernel`` realizes the message ``sum_j k(f_i, f_j) Q_j`` with a permutohedral filter bank;
``DenseKernel`` holds an explicit ``n x n`` affinity matrix and serves as the exact reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Protocol

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist

from permutofilt.errors import ShapeMismatchError
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.filter_bank import FilterBank
from permutofilt.ops.permuto import (
    DEFAULT_CHUNK,
    LatticeOperators,
    as_2d,
    build_operators,
    forward,
    grad_filter,
    grad_input,
    self_contribution,
    self_contribution_grad,
)


class PairwiseFilter(Protocol):
    """Interface shared by lattice and dense message filters."""

    weight: float

    @property
    def n(self) -> int: ...

    def filter(self, q: FloatArray) -> FloatArray: ...

    def filter_transpose(self, g: FloatArray) -> FloatArray: ...

    def self_weights(self) -> FloatArray: ...

    def bank_grad(self, g: FloatArray, q: FloatArray) -> FloatArray | None: ...

    def self_weights_grad(self, coef: FloatArray) -> FloatArray | None: ...


@dataclass(frozen=True)
class LatticeKernel:
    """Permutohedral message filter over one feature space.

    With ``normalize`` the response is divided by the filtered ones signal, so every row of the
    implied affinity matrix sums to one.
    """

    ops: LatticeOperators
    bank: FilterBank
    weight: float = 1.0
    normalize: bool = False
    chunk: int = DEFAULT_CHUNK
    threads: int = 1

    def __post_init__(self) -> None:
        if not self.bank.is_scalar:
            raise ShapeMismatchError("CRF message filters need a scalar (1x1xt) filter bank")
        if not self.ops.shared:
            raise ShapeMismatchError("CRF message filters need identical input and output points")
        if self.bank.s != self.ops.s or self.bank.d != self.ops.d:
            raise ShapeMismatchError(
                f"filter is d={self.bank.d} s={self.bank.s}, "
                f"lattice is d={self.ops.d} s={self.ops.s}"
            )

    @classmethod
    def from_features(
        cls,
        features: npt.ArrayLike,
        scales: npt.ArrayLike,
        bank: FilterBank,
        weight: float = 1.0,
        normalize: bool = False,
        threads: int = 1,
    ) -> LatticeKernel:
        ops = build_operators(features, scales, bank.s)
        return cls(ops=ops, bank=bank, weight=weight, normalize=normalize, threads=threads)

    def with_params(self, taps: npt.ArrayLike, weight: float) -> LatticeKernel:
        return replace(self, bank=self.bank.with_weights(taps), weight=float(weight))

    @property
    def n(self) -> int:
        return self.ops.n_in

    @cached_property
    def denominator(self) -> FloatArray:
        den = self._raw(np.ones((self.n, 1)))[:, 0]
        return np.where(np.abs(den) > 1e-12, den, 1.0)

    def _raw(self, q: FloatArray) -> FloatArray:
        return forward(q, self.ops, self.bank, chunk=self.chunk, threads=self.threads)

    def filter(self, q: FloatArray) -> FloatArray:
        out = self._raw(as_2d(q))
        if self.normalize:
            out = out / self.denominator[:, np.newaxis]
        return out

    def filter_transpose(self, g: FloatArray) -> FloatArray:
        gs = as_2d(g)
        if self.normalize:
            gs = gs / self.denominator[:, np.newaxis]
        return grad_input(gs, self.ops, self.bank, chunk=self.chunk, threads=self.threads)

    def self_weights(self) -> FloatArray:
        diag = self_contribution(self.ops, self.bank)
        if self.normalize:
            diag = diag / self.denominator
        return diag

    def bank_grad(self, g: FloatArray, q: FloatArray) -> FloatArray:
        """Gradient of ``<g, filter(q)>`` with respect to the taps."""
        gs = as_2d(g)
        qs = as_2d(q)
        if not self.normalize:
            return grad_filter(gs, qs, self.ops, self.bank, chunk=self.chunk, threads=self.threads)
        den = self.denominator[:, np.newaxis]
        numerator = self._raw(qs)
        g_num = gs / den
        g_den = -np.sum(gs * numerator, axis=1, keepdims=True) / den**2
        ones = np.ones((self.n, 1))
        return grad_filter(
            g_num, qs, self.ops, self.bank, chunk=self.chunk, threads=self.threads
        ) + grad_filter(g_den, ones, self.ops, self.bank, chunk=self.chunk, threads=self.threads)

    def self_weights_grad(self, coef: FloatArray) -> FloatArray:
        """Gradient of ``sum_i coef[i] * self_weights()[i]`` with respect to the taps."""
        c = np.asarray(coef, dtype=np.float64).reshape(-1)
        if not self.normalize:
            return self_contribution_grad(c, self.ops, self.bank)
        den = self.denominator
        diag = self_contribution(self.ops, self.bank)
        direct = self_contribution_grad(c / den, self.ops, self.bank)
        through_den = grad_filter(
            (-c * diag / den**2)[:, np.newaxis], np.ones((self.n, 1)), self.ops, self.bank
        )
        return direct + through_den


@dataclass(frozen=True)
class DenseKernel:
    """Explicit affinity matrix ``K[i, j]``; messages are ``K @ Q``."""

    matrix: FloatArray
    weight: float = 1.0
    name: str = field(default="dense")

    def __post_init__(self) -> None:
        k = np.asarray(self.matrix, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ShapeMismatchError(f"affinity matrix must be square, got {k.shape}")
        object.__setattr__(self, "matrix", k)

    @classmethod
    def from_gaussian(
        cls, features: npt.ArrayLike, scales: npt.ArrayLike, weight: float = 1.0
    ) -> DenseKernel:
        """``k(f_i, f_j) = exp(-|L (f_i - f_j)|^2 / 2)`` for diagonal scaling ``L``."""
        f = np.asarray(features, dtype=np.float64)
        scaled = f * np.broadcast_to(np.asarray(scales, dtype=np.float64), (f.shape[1],))
        return cls(matrix=np.exp(-0.5 * cdist(scaled, scaled, "sqeuclidean")), weight=weight)

    @classmethod
    def from_lattice(cls, kernel: LatticeKernel) -> DenseKernel:
        """Materialize the exact matrix a lattice kernel applies."""
        eye = np.eye(kernel.n)
        return cls(matrix=kernel.filter(eye), weight=kernel.weight, name="lattice")

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def filter(self, q: FloatArray) -> FloatArray:
        return np.asarray(self.matrix @ as_2d(q))

    def filter_transpose(self, g: FloatArray) -> FloatArray:
        return np.asarray(self.matrix.T @ as_2d(g))

    def self_weights(self) -> FloatArray:
        return np.diag(self.matrix).copy()

    def bank_grad(self, g: FloatArray, q: FloatArray) -> None:
        return None

    def self_weights_grad(self, coef: FloatArray) -> None:
        return None
