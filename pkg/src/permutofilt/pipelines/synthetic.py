"""Seeded synthetic data for the pipelines and their tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from permutofilt.errors import ParameterError
from permutofilt.io import PointCloudSignal
from permutofilt.lattice.core import FloatArray, IntArray
from permutofilt.pipelines.images import BT601, ImageBuffer

DENOISE_SIGMA = 25.0 / 255.0


def piecewise_constant_image(
    rng: np.random.Generator,
    width: int,
    height: int,
    channels: int = 1,
    regions: int = 5,
    shading: float = 0.0,
) -> ImageBuffer:
    """Voronoi regions with well separated gray levels and an optional linear shading per region."""
    if regions < 1:
        raise ParameterError(f"regions must be >= 1, got {regions}")
    seeds = rng.uniform(0.0, 1.0, size=(regions, 2)) * [width, height]
    ys, xs = np.mgrid[0:height, 0:width]
    pos = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1).astype(np.float64)
    owner = np.argmin(cdist(pos, seeds, "sqeuclidean"), axis=1)
    levels = rng.permutation(np.linspace(0.1, 0.9, regions))
    gray = levels[owner]
    if shading:
        slopes = rng.uniform(-shading, shading, size=(regions, 2))
        gray = gray + np.sum(slopes[owner] * (pos / [width, height] - 0.5), axis=1)
    if channels == 1:
        pixels = gray[:, np.newaxis]
    else:
        tint = rng.uniform(-0.08, 0.08, size=(regions, 3))
        tint -= (tint @ BT601)[:, np.newaxis]  # keep the luma of every region
        pixels = gray[:, np.newaxis] + tint[owner]
    return ImageBuffer(np.clip(pixels, 0.0, 1.0).reshape(height, width, channels))


def add_noise(img: ImageBuffer, sigma: float, rng: np.random.Generator) -> ImageBuffer:
    """Additive Gaussian noise, clipped to [0, 1] afterwards."""
    noisy = img.pixels + rng.normal(0.0, sigma, size=img.pixels.shape)
    return ImageBuffer(np.clip(noisy, 0.0, 1.0))


def denoising_pairs(
    seed: int, count: int, size: int = 64, sigma: float = DENOISE_SIGMA
) -> list[tuple[ImageBuffer, ImageBuffer]]:
    """``count`` (noisy, clean) gray image pairs."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        regions = int(rng.integers(3, 7))
        clean = piecewise_constant_image(rng, size, size, 1, regions=regions, shading=0.2)
        pairs.append((add_noise(clean, sigma, rng), clean))
    return pairs


def smooth_embedding(rng: np.random.Generator, n: int, dim: int = 4) -> FloatArray:
    """Points on a smooth 2-D sheet curled into ``dim`` dimensions."""
    uv = rng.uniform(0.0, 1.0, size=(n, 2))
    freqs = rng.uniform(0.5, 1.5, size=(dim, 2))
    phases = rng.uniform(0.0, 2 * np.pi, size=dim)
    return np.sin(2 * np.pi * uv @ freqs.T * 0.5 + phases)


@dataclass(frozen=True)
class DisplacementSample:
    noisy: PointCloudSignal
    clean: FloatArray


def displacement_sample(
    rng: np.random.Generator, n: int = 800, dim: int = 4, noise: float = 0.3
) -> DisplacementSample:
    """Smooth 3-D displacements over a smooth embedding, plus Gaussian noise."""
    features = smooth_embedding(rng, n, dim)
    mix = rng.normal(size=(dim, 3))
    clean = np.tanh(features @ mix)
    noisy = clean + rng.normal(0.0, noise, size=clean.shape)
    return DisplacementSample(noisy=PointCloudSignal(values=noisy, features=features), clean=clean)


@dataclass(frozen=True)
class CrfInstance:
    """Clustered points with ground-truth labels and noisy unaries."""

    features: FloatArray
    labels: IntArray
    unaries: FloatArray


def clustered_crf_instance(
    rng: np.random.Generator,
    n: int = 200,
    num_labels: int = 3,
    clusters: int = 6,
    spread: float = 0.5,
    flip: float = 0.3,
) -> CrfInstance:
    """Gaussian clusters in 2-D with one label each.

    Unaries favour a wrong label at rate ``flip``.
    """
    centers = rng.uniform(0.0, 10.0, size=(clusters, 2))
    cluster_label = rng.integers(0, num_labels, size=clusters)
    owner = rng.integers(0, clusters, size=n)
    features = centers[owner] + rng.normal(0.0, spread, size=(n, 2))
    labels = cluster_label[owner].astype(np.int64)
    observed = labels.copy()
    flipped = rng.uniform(size=n) < flip
    observed[flipped] = rng.integers(0, num_labels, size=int(flipped.sum()))
    unaries = np.full((n, num_labels), 1.0)
    unaries[np.arange(n), observed] = 0.0
    unaries += rng.uniform(0.0, 0.2, size=unaries.shape)
    return CrfInstance(features=features, labels=labels, unaries=unaries)
