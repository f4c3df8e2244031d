"""Explicit Gaussian gram-matrix bilateral filtering with learnable scales and feature transform.

``K[i, j] = exp(-theta |L g_i - L f_j|^2) / sum_j' exp(-theta |L g_i - L f_j'|^2)`` for input
features ``f`` (P points) and output features ``g`` (Q points). A module combines H such kernels
per channel, ``zbar_c = sum_h w[h, c] (K_h z)_c``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist

from permutofilt.errors import (
    CacheMissingError,
    EmptyInputError,
    ParameterError,
    ShapeMismatchError,
)
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.permuto import as_2d

logger = logging.getLogger(__name__)

DEFAULT_THETAS = (1.0, 0.7, 0.3, 0.1, 0.03)


def as_transform(transform: npt.ArrayLike, dim: int) -> FloatArray:
    """A (D, D) feature transform; a vector or scalar is taken as a diagonal."""
    lam = np.asarray(transform, dtype=np.float64)
    if lam.ndim < 2:
        lam = np.diag(np.broadcast_to(lam, (dim,)).astype(np.float64))
    if lam.shape != (dim, dim):
        raise ShapeMismatchError(f"feature transform must be ({dim}, {dim}), got {lam.shape}")
    return lam


@dataclass(frozen=True)
class PairwiseDistances:
    """Squared distances between transformed output and input features, shared by all scales."""

    features_in: FloatArray
    features_out: FloatArray
    transform: FloatArray
    sqdist: FloatArray

    @classmethod
    def compute(
        cls, features_in: npt.ArrayLike, features_out: npt.ArrayLike, transform: npt.ArrayLike
    ) -> PairwiseDistances:
        f_in = np.asarray(features_in, dtype=np.float64)
        f_out = np.asarray(features_out, dtype=np.float64)
        if f_in.ndim != 2 or f_in.shape[0] == 0:
            raise EmptyInputError(f"gram kernel needs at least one input feature, got {f_in.shape}")
        if f_out.ndim != 2 or f_out.shape[1] != f_in.shape[1]:
            raise ShapeMismatchError(
                f"output features {f_out.shape} do not match input dimension {f_in.shape[1]}"
            )
        lam = as_transform(transform, f_in.shape[1])
        sqdist = cdist(f_out @ lam.T, f_in @ lam.T, "sqeuclidean")
        return cls(features_in=f_in, features_out=f_out, transform=lam, sqdist=sqdist)

    def transform_grad(self, g_sqdist: FloatArray) -> FloatArray:
        """Gradient with respect to the transform of ``sum_ij G[i, j] * sqdist[i, j]``.

        Uses ``2 L sum_ij G_ij (g_i - f_j)(g_i - f_j)^T`` without forming the pairwise differences.
        """
        g_out, f_in = self.features_out, self.features_in
        row = g_sqdist.sum(axis=1)
        col = g_sqdist.sum(axis=0)
        cross = g_out.T @ g_sqdist @ f_in
        moment = (g_out.T * row) @ g_out + (f_in.T * col) @ f_in - cross - cross.T
        return 2.0 * self.transform @ moment


@dataclass(frozen=True)
class GramKernel:
    """Row-stochastic kernel ``matrix`` (Q, P) at scale ``theta``."""

    matrix: FloatArray
    theta: float
    cache: PairwiseDistances | None

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.matrix.shape[0]), int(self.matrix.shape[1])

    def unnormalized(self) -> FloatArray:
        if self.cache is None:
            raise CacheMissingError("unnormalized affinities need the distance cache")
        return np.exp(-self.theta * self.cache.sqdist)

    def without_cache(self) -> GramKernel:
        return replace(self, cache=None)


def gram_from_distances(distances: PairwiseDistances, theta: float) -> GramKernel:
    if theta <= 0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    logits = -theta * distances.sqdist
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return GramKernel(matrix=weights, theta=float(theta), cache=distances)


def build_gram(
    features_in: npt.ArrayLike,
    features_out: npt.ArrayLike,
    transform: npt.ArrayLike,
    theta: float,
) -> GramKernel:
    """Row-normalized Gaussian affinities between output and input features."""
    distances = PairwiseDistances.compute(features_in, features_out, transform)
    return gram_from_distances(distances, theta)


def build_grams(
    features_in: npt.ArrayLike,
    features_out: npt.ArrayLike,
    transform: npt.ArrayLike,
    thetas: Sequence[float] = DEFAULT_THETAS,
) -> list[GramKernel]:
    """One kernel per scale, all sharing a single distance computation."""
    distances = PairwiseDistances.compute(features_in, features_out, transform)
    return [gram_from_distances(distances, theta) for theta in thetas]


def gram_apply(kernel: GramKernel, z: npt.ArrayLike) -> FloatArray:
    zs = as_2d(z)
    if zs.shape[0] != kernel.shape[1]:
        raise ShapeMismatchError(f"kernel takes {kernel.shape[1]} input points, got {zs.shape[0]}")
    return np.asarray(kernel.matrix @ zs)


def uniform_weights(num_scales: int, channels: int) -> FloatArray:
    return np.full((num_scales, channels), 1.0 / num_scales)


def _check_module(z: FloatArray, kernels: Sequence[GramKernel], w: FloatArray) -> None:
    if not kernels:
        raise ShapeMismatchError("inception module needs at least one kernel")
    shapes = {k.shape for k in kernels}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"kernels disagree on shape: {sorted(shapes)}")
    if w.shape != (len(kernels), z.shape[1]):
        raise ShapeMismatchError(
            f"combination weights must be ({len(kernels)}, {z.shape[1]}), got {w.shape}"
        )


def inception_forward(
    z: npt.ArrayLike, kernels: Sequence[GramKernel], w: npt.ArrayLike
) -> FloatArray:
    """``zbar[:, c] = sum_h w[h, c] * (K_h z)[:, c]``."""
    zs = as_2d(z)
    weights = np.asarray(w, dtype=np.float64)
    _check_module(zs, kernels, weights)
    out = np.zeros((kernels[0].shape[0], zs.shape[1]))
    for h, kernel in enumerate(kernels):
        out += weights[h] * gram_apply(kernel, zs)
    return out


@dataclass(frozen=True)
class InceptionGrads:
    """Gradients of a scalar loss through one inception module."""

    z: FloatArray
    w: FloatArray
    thetas: FloatArray
    transform: FloatArray


def inception_backward(
    upstream: npt.ArrayLike,
    z: npt.ArrayLike,
    kernels: Sequence[GramKernel],
    w: npt.ArrayLike,
) -> InceptionGrads:
    """Reverse through the combination, the row normalization, the exponent and the transform.

    Kernels are expected to share one transform; its gradient sums over all scales.
    """
    zs = as_2d(z)
    g = as_2d(upstream)
    weights = np.asarray(w, dtype=np.float64)
    _check_module(zs, kernels, weights)
    if g.shape != (kernels[0].shape[0], zs.shape[1]):
        expected = (kernels[0].shape[0], zs.shape[1])
        raise ShapeMismatchError(f"upstream is {g.shape}, expected {expected}")
    g_z = np.zeros_like(zs)
    g_w = np.zeros_like(weights)
    g_thetas = np.zeros(len(kernels))
    g_transform: FloatArray | None = None
    for h, kernel in enumerate(kernels):
        if kernel.cache is None:
            raise CacheMissingError(f"kernel {h} was built without its distance cache")
        filtered = gram_apply(kernel, zs)
        g_w[h] = np.sum(g * filtered, axis=0)
        g_hat = g * weights[h]
        g_z += kernel.matrix.T @ g_hat
        g_k = g_hat @ zs.T
        k = kernel.matrix
        g_logits = k * (g_k - np.sum(g_k * k, axis=1, keepdims=True))
        g_thetas[h] = -float(np.sum(g_logits * kernel.cache.sqdist))
        contribution = kernel.cache.transform_grad(-kernel.theta * g_logits)
        g_transform = contribution if g_transform is None else g_transform + contribution
    assert g_transform is not None
    return InceptionGrads(z=g_z, w=g_w, thetas=g_thetas, transform=g_transform)


class InceptionModule:
    """Bilateral inception module owning its scales, combination weights and feature transform."""

    def __init__(
        self,
        transform: npt.ArrayLike,
        thetas: Sequence[float] = DEFAULT_THETAS,
        weights: npt.ArrayLike | None = None,
        channels: int = 1,
    ):
        self.thetas = np.asarray(thetas, dtype=np.float64)
        if self.thetas.ndim != 1 or self.thetas.size == 0 or np.any(self.thetas <= 0):
            raise ParameterError(f"thetas must be non-empty and positive, got {list(thetas)}")
        self.transform = np.asarray(transform, dtype=np.float64)
        self.weights = (
            uniform_weights(self.thetas.size, channels)
            if weights is None
            else np.asarray(weights, dtype=np.float64)
        )
        self._kernels: list[GramKernel] | None = None
        self._z: FloatArray | None = None

    def forward(
        self, z: npt.ArrayLike, features_in: npt.ArrayLike, features_out: npt.ArrayLike
    ) -> FloatArray:
        self._z = as_2d(z)
        self._kernels = build_grams(features_in, features_out, self.transform, self.thetas.tolist())
        logger.debug(
            "inception forward P=%d Q=%d H=%d",
            self._kernels[0].shape[1],
            self._kernels[0].shape[0],
            len(self._kernels),
        )
        return inception_forward(self._z, self._kernels, self.weights)

    def backward(self, upstream: npt.ArrayLike) -> InceptionGrads:
        if self._kernels is None or self._z is None:
            raise CacheMissingError("backward called before forward")
        return inception_backward(upstream, self._z, self._kernels, self.weights)
