"""Fit the taps of a single lattice filter to (input, target) signal pairs by SGD on MSE."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from permutofilt.config import TrainingConfig
from permutofilt.errors import EmptyDatasetError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.filter_bank import FilterBank
from permutofilt.ops.permuto import (
    LatticeOperators,
    as_2d,
    forward,
    grad_filter,
    normalized_forward,
    normalized_grad_filter,
)
from permutofilt.training.losses import mse_loss
from permutofilt.training.sgd import SgdState, batch_order, sgd_step

logger = logging.getLogger(__name__)

TRAILING_WINDOW = 10


@dataclass(frozen=True)
class FilterSample:
    """One training pair: input signal on ``ops`` input points, target on its output points."""

    ops: LatticeOperators
    values: FloatArray
    target: FloatArray

    def __post_init__(self) -> None:
        values = as_2d(self.values)
        target = as_2d(self.target)
        if values.shape[0] != self.ops.n_in:
            raise ShapeMismatchError(f"{values.shape[0]} input values for {self.ops.n_in} points")
        if target.shape[0] != self.ops.n_out:
            raise ShapeMismatchError(f"{target.shape[0]} targets for {self.ops.n_out} points")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)


@dataclass
class FitResult:
    """Best filter by training loss and the per-epoch loss history (entry 0 is the initial loss)."""

    bank: FilterBank
    initial_loss: float
    best_loss: float
    history: list[float] = field(default_factory=list)


def predict(
    sample: FilterSample, bank: FilterBank, normalize: bool, threads: int = 1
) -> FloatArray:
    if normalize:
        return normalized_forward(sample.values, sample.ops, bank, threads=threads).values
    return forward(sample.values, sample.ops, bank, threads=threads)


def sample_loss_and_grad(
    sample: FilterSample, bank: FilterBank, normalize: bool, threads: int = 1
) -> tuple[float, FloatArray]:
    """MSE of one sample and its gradient with respect to the taps."""
    if normalize:
        out = normalized_forward(sample.values, sample.ops, bank, threads=threads)
        loss, g = mse_loss(out.values, sample.target)
        return loss, normalized_grad_filter(
            g, sample.values, out, sample.ops, bank, threads=threads
        )
    pred = forward(sample.values, sample.ops, bank, threads=threads)
    loss, g = mse_loss(pred, sample.target)
    return loss, grad_filter(g, sample.values, sample.ops, bank, threads=threads)


def dataset_loss(
    samples: Sequence[FilterSample], bank: FilterBank, normalize: bool, threads: int = 1
) -> float:
    return float(
        np.mean([mse_loss(predict(s, bank, normalize, threads), s.target)[0] for s in samples])
    )


def fit_filter(
    samples: Sequence[FilterSample],
    bank: FilterBank,
    config: TrainingConfig,
    normalize: bool = True,
    threads: int = 1,
) -> FitResult:
    """SGD from ``bank`` over seeded mini-batches; returns the filter with the lowest train loss.

    Weight decay applies to the taps. A warning is logged when the loss rises over the trailing
    ten-epoch window.
    """
    if not samples:
        raise EmptyDatasetError("fit_filter needs at least one training sample")
    state = SgdState(
        lr=config.lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
        decay=frozenset({"taps"}),
    )
    current = bank
    initial = dataset_loss(samples, current, normalize, threads)
    result = FitResult(bank=bank, initial_loss=initial, best_loss=initial, history=[initial])
    logger.info("fit start: %d samples, %d taps, loss %.6e", len(samples), bank.t, initial)

    for epoch in range(config.epochs):
        for batch in batch_order(len(samples), config.batch, config.seed, epoch):
            grad = np.zeros_like(current.weights)
            for i in batch:
                loss, g = sample_loss_and_grad(samples[int(i)], current, normalize, threads)
                grad += g / len(batch)
                logger.debug("epoch %d sample %d loss %.6e", epoch, int(i), loss)
            updated = sgd_step({"taps": current.weights}, {"taps": grad}, state)
            if not np.all(np.isfinite(updated["taps"])):
                logger.warning("taps diverged in epoch %d, keeping best filter so far", epoch + 1)
                return result
            current = current.with_weights(updated["taps"])
        epoch_loss = dataset_loss(samples, current, normalize, threads)
        result.history.append(epoch_loss)
        if np.isfinite(epoch_loss) and epoch_loss < result.best_loss:
            result.best_loss = epoch_loss
            result.bank = current
        logger.info("epoch %d/%d: train loss %.6e", epoch + 1, config.epochs, epoch_loss)

    window = result.history[-TRAILING_WINDOW:]
    if len(window) > 1 and window[-1] > window[0]:
        logger.warning(
            "training loss rose over the last %d epochs (%.6e -> %.6e)",
            len(window) - 1,
            window[0],
            window[-1],
        )
    logger.info("fit done: best train loss %.6e (initial %.6e)", result.best_loss, initial)
    return result
