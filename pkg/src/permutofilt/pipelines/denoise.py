"""Image denoising with Gaussian or learned bilateral filters and a spatial baseline."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from permutofilt.config import TASK_PRESETS, FeatureKind, TrainingConfig
from permutofilt.errors import EmptyDatasetError
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import LatticeOperators, build_operators
from permutofilt.pipelines.fitting import FilterSample, fit_filter, predict
from permutofilt.pipelines.images import FeatureRecipe, ImageBuffer, make_features, psnr
from permutofilt.pipelines.reporting import EvaluationRow
from permutofilt.training.losses import mse_loss
from permutofilt.training.sgd import SgdState, batch_order, sgd_step

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 1.0
SPATIAL_SIZE = 5

ImagePair = tuple[ImageBuffer, ImageBuffer]


def default_recipe() -> FeatureRecipe:
    preset = TASK_PRESETS["image_denoising"]
    return FeatureRecipe(kind=FeatureKind.parse(preset.features), scales=preset.scales)


def image_operators(img: ImageBuffer, recipe: FeatureRecipe, s: int) -> LatticeOperators:
    """Lattice operators with input and output points at the pixels of ``img``."""
    return build_operators(make_features(img, recipe), 1.0, s)


def _sample(noisy: ImageBuffer, clean: ImageBuffer, recipe: FeatureRecipe, s: int) -> FilterSample:
    ops = image_operators(noisy, recipe, s)
    return FilterSample(ops=ops, values=noisy.flat(), target=clean.flat())


def denoise_apply(
    img: ImageBuffer,
    bank: FilterBank,
    recipe: FeatureRecipe,
    normalize: bool = True,
    threads: int = 1,
) -> ImageBuffer:
    """Filter ``img`` over its own pixel features; the result is clamped to [0, 1]."""
    ops = image_operators(img, recipe, bank.s)
    sample = FilterSample(ops=ops, values=img.flat(), target=img.flat())
    out = predict(sample, bank, normalize, threads)
    return ImageBuffer.from_flat(out, img.width, img.height).clamped()


def denoise_train(
    pairs: Sequence[ImagePair],
    recipe: FeatureRecipe,
    s: int,
    config: TrainingConfig,
    sigma: float = DEFAULT_SIGMA,
    normalize: bool = True,
    threads: int = 1,
) -> FilterBank:
    """Fit all taps from a Gaussian start to minimize MSE against the clean images."""
    if not pairs:
        raise EmptyDatasetError("denoise_train needs at least one (noisy, clean) pair")
    samples = [_sample(noisy, clean, recipe, s) for noisy, clean in pairs]
    init = gaussian_init(recipe.dim, s, sigma)
    return fit_filter(samples, init, config, normalize=normalize, threads=threads).bank


def _windows(img: ImageBuffer, size: int) -> FloatArray:
    half = size // 2
    padded = np.pad(img.pixels, ((half, half), (half, half), (0, 0)), mode="reflect")
    # (h, w, c, size, size)
    return sliding_window_view(padded, (size, size), axis=(0, 1))


def spatial_apply(img: ImageBuffer, kernel: FloatArray) -> ImageBuffer:
    """Correlate every channel with a square kernel under reflect padding."""
    out = np.einsum("hwcab,ab->hwc", _windows(img, kernel.shape[0]), kernel)
    return ImageBuffer(out).clamped()


def box_kernel(size: int = SPATIAL_SIZE) -> FloatArray:
    return np.full((size, size), 1.0 / size**2)


def spatial_train(
    pairs: Sequence[ImagePair], config: TrainingConfig, size: int = SPATIAL_SIZE
) -> FloatArray:
    """Learn a ``size x size`` kernel from a box start with the same SGD loop and MSE loss."""
    if not pairs:
        raise EmptyDatasetError("spatial_train needs at least one (noisy, clean) pair")
    windows = [_windows(noisy, size) for noisy, _ in pairs]
    targets = [clean.pixels for _, clean in pairs]

    def loss_and_grad(kernel: FloatArray, i: int) -> tuple[float, FloatArray]:
        pred = np.einsum("hwcab,ab->hwc", windows[i], kernel)
        loss, g = mse_loss(pred, targets[i])
        return loss, np.einsum("hwc,hwcab->ab", g, windows[i])

    state = SgdState(
        lr=config.lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
        decay=frozenset({"k"}),
    )
    kernel = box_kernel(size)
    best = kernel
    best_loss = float(np.mean([loss_and_grad(kernel, i)[0] for i in range(len(pairs))]))
    for epoch in range(config.epochs):
        for batch in batch_order(len(pairs), config.batch, config.seed, epoch):
            grad = np.zeros_like(kernel)
            for i in batch:
                grad += loss_and_grad(kernel, int(i))[1] / len(batch)
            kernel = sgd_step({"k": kernel}, {"k": grad}, state)["k"]
        loss = float(np.mean([loss_and_grad(kernel, i)[0] for i in range(len(pairs))]))
        if np.isfinite(loss) and loss < best_loss:
            best, best_loss = kernel, loss
        logger.debug("spatial epoch %d: train loss %.6e", epoch + 1, loss)
    return best


def denoise_report(
    train: Sequence[ImagePair],
    test: Sequence[ImagePair],
    recipe: FeatureRecipe,
    s: int,
    config: TrainingConfig,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
) -> tuple[list[EvaluationRow], FilterBank]:
    """Held-out PSNR of Noisy, Spatial, Gauss and Learned; also returns the learned filter."""
    gauss = gaussian_init(recipe.dim, s, sigma)
    learned = denoise_train(train, recipe, s, config, sigma=sigma, threads=threads)
    spatial = spatial_train(train, config)
    rows: list[EvaluationRow] = []
    for i, (noisy, clean) in enumerate(test):
        name = f"test_{i:03d}"
        outputs = {
            "Noisy": noisy,
            "Spatial": spatial_apply(noisy, spatial),
            "Gauss": denoise_apply(noisy, gauss, recipe, threads=threads),
            "Learned": denoise_apply(noisy, learned, recipe, threads=threads),
        }
        rows.extend(
            EvaluationRow(method=method, sample=name, value=psnr(out, clean))
            for method, out in outputs.items()
        )
    return rows, learned
