"""Losses, optimizer and gradient checking."""

from permutofilt.training.gradcheck import GradCheckReport, grad_check
from permutofilt.training.losses import (
    LossKind,
    inverse_frequency_weights,
    logistic_loss,
    mse_loss,
)
from permutofilt.training.sgd import SgdState, batch_order, sgd_step

__all__ = [
    "GradCheckReport",
    "LossKind",
    "SgdState",
    "batch_order",
    "grad_check",
    "inverse_frequency_weights",
    "logistic_loss",
    "mse_loss",
    "sgd_step",
]
