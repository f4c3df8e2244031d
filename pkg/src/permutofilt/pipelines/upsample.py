"""Joint bilateral upsampling guided by a high-resolution image, and the bicubic baseline.

A low-resolution image is splatted at its pixel positions (mapped to high-resolution coordinates)
and its downsampled guidance photometry, filtered, then sliced at the high-resolution guidance
features.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from permutofilt.config import TASK_PRESETS, FeatureKind, TrainingConfig
from permutofilt.errors import EmptyDatasetError, ParameterError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import build_operators, forward, normalized_forward
from permutofilt.pipelines.fitting import FilterSample, fit_filter
from permutofilt.pipelines.images import (
    FeatureRecipe,
    ImageBuffer,
    make_features,
    mse,
    pixel_positions,
    psnr,
)
from permutofilt.pipelines.reporting import EvaluationRow

logger = logging.getLogger(__name__)

CATMULL_ROM = -0.5
DEFAULT_SIGMA = 1.0


def _check_factor(factor: int) -> int:
    if factor < 1:
        raise ParameterError(f"factor must be >= 1, got {factor}")
    return factor


def default_recipe(factor: int) -> FeatureRecipe:
    """Protocol scales for 2/4/8/16x colour upsampling, ``0.25 / factor`` positions otherwise."""
    _check_factor(factor)
    preset = TASK_PRESETS.get(f"color_upsampling_{factor}x")
    scales = preset.scales if preset is not None else [0.25 / factor, 0.17]
    return FeatureRecipe(kind=FeatureKind.POSITION_INTENSITY, scales=scales)


def downsample(img: ImageBuffer, factor: int) -> ImageBuffer:
    """Block mean over ``factor x factor`` tiles; trailing rows and columns are cropped."""
    _check_factor(factor)
    h, w = img.height // factor, img.width // factor
    if h == 0 or w == 0:
        raise ShapeMismatchError(f"{img.width}x{img.height} image is smaller than factor {factor}")
    tiles = img.pixels[: h * factor, : w * factor].reshape(h, factor, w, factor, img.channels)
    return ImageBuffer(tiles.mean(axis=(1, 3)))


def cubic_weights(t: npt.ArrayLike, a: float = CATMULL_ROM) -> FloatArray:
    """Keys cubic convolution kernel evaluated at distances ``t``."""
    x = np.abs(np.asarray(t, dtype=np.float64))
    near = (a + 2) * x**3 - (a + 3) * x**2 + 1
    far = a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def _resample_matrix(n_in: int, n_out: int, factor: float) -> FloatArray:
    """Rows interpolate one output sample from the inputs; borders are replicated."""
    centers = (np.arange(n_out) + 0.5) / factor - 0.5
    base = np.floor(centers).astype(np.int64)
    matrix = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in range(-1, 3):
        idx = base + offset
        w = cubic_weights(centers - idx)
        np.add.at(matrix, (rows, np.clip(idx, 0, n_in - 1)), w)
    return matrix


def bicubic_upsample(
    img: ImageBuffer, factor: int, width: int | None = None, height: int | None = None
) -> ImageBuffer:
    """Catmull-Rom bicubic resampling to ``factor`` times the size (or ``width x height``)."""
    _check_factor(factor)
    w_out = img.width * factor if width is None else width
    h_out = img.height * factor if height is None else height
    rx = _resample_matrix(img.width, w_out, factor)
    ry = _resample_matrix(img.height, h_out, factor)
    out = np.einsum("yh,hwc,xw->yxc", ry, img.pixels, rx)
    return ImageBuffer(out).clamped()


def low_res_positions(width: int, height: int, factor: int) -> FloatArray:
    """Centres of low-resolution pixels in high-resolution pixel coordinates."""
    return (pixel_positions(width, height) + 0.5) * factor - 0.5


@dataclass(frozen=True)
class UpsampleProblem:
    """Low-resolution values with the features of their points and of the high-resolution pixels."""

    low: ImageBuffer
    guidance: ImageBuffer
    factor: int
    features_low: FloatArray
    features_high: FloatArray

    @classmethod
    def build(
        cls, low: ImageBuffer, guidance: ImageBuffer, factor: int, recipe: FeatureRecipe
    ) -> UpsampleProblem:
        guide_low = downsample(guidance, factor)
        if (guide_low.width, guide_low.height) != (low.width, low.height):
            raise ShapeMismatchError(
                f"low image is {low.width}x{low.height}, guidance/{factor} is "
                f"{guide_low.width}x{guide_low.height}"
            )
        positions = low_res_positions(low.width, low.height, factor)
        return cls(
            low=low,
            guidance=guidance,
            factor=factor,
            features_low=make_features(guide_low, recipe, positions=positions),
            features_high=make_features(guidance, recipe),
        )


def upsample_signal(
    values: npt.ArrayLike,
    features_low: npt.ArrayLike,
    features_high: npt.ArrayLike,
    bank: FilterBank,
    normalize: bool = True,
    threads: int = 1,
) -> tuple[FloatArray, npt.NDArray[np.bool_]]:
    """Filter low-resolution values onto high-resolution features; also returns covered points."""
    ops = build_operators(features_low, 1.0, bank.s, features_out=features_high)
    if normalize:
        out = normalized_forward(values, ops, bank, threads=threads)
        return out.values, out.covered
    covered = ops.slice.point_weight_sums() > 0
    return forward(values, ops, bank, threads=threads), covered


def upsample_guided(
    low: ImageBuffer,
    guidance: ImageBuffer,
    factor: int,
    bank: FilterBank,
    recipe: FeatureRecipe,
    normalize: bool = True,
    threads: int = 1,
) -> ImageBuffer:
    """Joint bilateral upsampling; pixels touching no populated vertex fall back to bicubic."""
    problem = UpsampleProblem.build(low, guidance, factor, recipe)
    values, covered = upsample_signal(
        low.flat(), problem.features_low, problem.features_high, bank, normalize, threads
    )
    if not np.all(covered):
        fallback = bicubic_upsample(low, factor, guidance.width, guidance.height).flat()
        values = np.where(covered[:, np.newaxis], values, fallback)
        logger.debug("%d pixels fell back to bicubic", int(np.count_nonzero(~covered)))
    return ImageBuffer.from_flat(values, guidance.width, guidance.height).clamped()


def upsample_train(
    triples: Sequence[tuple[ImageBuffer, ImageBuffer, ImageBuffer]],
    factor: int,
    recipe: FeatureRecipe,
    s: int,
    config: TrainingConfig,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
) -> FilterBank:
    """Learn the taps from ``(low, guidance, target)`` triples, starting from a Gaussian."""
    if not triples:
        raise EmptyDatasetError("upsample_train needs at least one training image")
    samples = []
    for low, guidance, target in triples:
        problem = UpsampleProblem.build(low, guidance, factor, recipe)
        ops = build_operators(problem.features_low, 1.0, s, features_out=problem.features_high)
        samples.append(FilterSample(ops=ops, values=low.flat(), target=target.flat()))
    init = gaussian_init(recipe.dim, s, sigma)
    return fit_filter(samples, init, config, normalize=True, threads=threads).bank


def upsample_report(
    images: Sequence[ImageBuffer],
    factor: int,
    recipe: FeatureRecipe,
    bank: FilterBank,
    learned: FilterBank | None = None,
    threads: int = 1,
) -> list[EvaluationRow]:
    """PSNR of bicubic and bilateral upsampling of each ``downsample(image)`` against the image."""
    rows: list[EvaluationRow] = []
    for i, truth in enumerate(images):
        low = downsample(truth, factor)
        target = ImageBuffer(truth.pixels[: low.height * factor, : low.width * factor])
        guidance = target.gray()
        outputs = {
            "Bicubic": bicubic_upsample(low, factor),
            "Gauss": upsample_guided(low, guidance, factor, bank, recipe, threads=threads),
        }
        if learned is not None:
            outputs["Learned"] = upsample_guided(
                low, guidance, factor, learned, recipe, threads=threads
            )
        for method, out in outputs.items():
            score = psnr(out, target)
            rows.append(EvaluationRow(method=method, sample=f"image_{i:03d}", value=score))
            logger.debug("image %d %s mse %.6e", i, method, mse(out, target))
    return rows
