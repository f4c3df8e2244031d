"""Superpixel-to-pixel bilateral inception filtering of an image."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from permutofilt.inception.gram import DEFAULT_THETAS, InceptionModule
from permutofilt.inception.superpixels import superpixel_reduce
from permutofilt.pipelines.images import FeatureRecipe, ImageBuffer, raw_features

logger = logging.getLogger(__name__)


def bi_filter(
    img: ImageBuffer,
    segment_map: npt.ArrayLike,
    recipe: FeatureRecipe,
    thetas: Sequence[float] = DEFAULT_THETAS,
    weights: npt.ArrayLike | None = None,
) -> ImageBuffer:
    """Filter segment means onto every pixel with a multi-scale gram-kernel module.

    Input points are the segments, featured by the mean position and photometry of their pixels;
    output points are the pixels. The recipe scales form the diagonal feature transform.
    """
    features = raw_features(img, recipe.kind)
    means, segment_features = superpixel_reduce(img.flat(), segment_map, features)
    assert segment_features is not None
    module = InceptionModule(
        transform=recipe.scale_vector(),
        thetas=thetas,
        weights=weights,
        channels=img.channels,
    )
    out = module.forward(means, segment_features, features)
    logger.info(
        "bi-filter: %d segments onto %d pixels at %d scales", means.shape[0], img.size, len(thetas)
    )
    return ImageBuffer.from_flat(out, img.width, img.height).clamped()
