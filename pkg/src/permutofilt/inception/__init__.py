"""Explicit gram-matrix bilateral filtering."""

from permutofilt.inception.gram import (
    DEFAULT_THETAS,
    GramKernel,
    InceptionGrads,
    InceptionModule,
    build_gram,
    build_grams,
    gram_apply,
    inception_backward,
    inception_forward,
)
from permutofilt.inception.superpixels import superpixel_expand, superpixel_reduce

__all__ = [
    "DEFAULT_THETAS",
    "GramKernel",
    "InceptionGrads",
    "InceptionModule",
    "build_gram",
    "build_grams",
    "gram_apply",
    "inception_backward",
    "inception_forward",
    "superpixel_expand",
    "superpixel_reduce",
]
