"""Permutohedral convolution operators and filter banks."""

from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import (
    DEFAULT_CHUNK,
    BlurNeighborhood,
    LatticeOperators,
    NormalizedOutput,
    Signal,
    SplatOperator,
    bnn_identity,
    build_blur,
    build_operators,
    build_slice,
    build_splat,
    convolve_lattice,
    convolve_lattice_adjoint,
    dense_operator,
    filter_signal,
    forward,
    grad_filter,
    grad_input,
    normalized_forward,
    normalized_grad_filter,
    normalized_grad_input,
    self_contribution,
)

__all__ = [
    "DEFAULT_CHUNK",
    "BlurNeighborhood",
    "FilterBank",
    "LatticeOperators",
    "NormalizedOutput",
    "Signal",
    "SplatOperator",
    "bnn_identity",
    "build_blur",
    "build_operators",
    "build_slice",
    "build_splat",
    "convolve_lattice",
    "convolve_lattice_adjoint",
    "dense_operator",
    "filter_signal",
    "forward",
    "gaussian_init",
    "grad_filter",
    "grad_input",
    "normalized_forward",
    "normalized_grad_filter",
    "normalized_grad_input",
    "self_contribution",
]
