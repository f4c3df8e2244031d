"""Dense CRF mean-field inference with lattice message passing."""

from permutofilt.crf.kernels import DenseKernel, LatticeKernel, PairwiseFilter
from permutofilt.crf.meanfield import (
    MarginalState,
    MeanFieldGrads,
    mf_backward,
    mf_init,
    mf_run,
    mf_step,
    potts,
)

__all__ = [
    "DenseKernel",
    "LatticeKernel",
    "MarginalState",
    "MeanFieldGrads",
    "PairwiseFilter",
    "mf_backward",
    "mf_init",
    "mf_run",
    "mf_step",
    "potts",
]
