"""Training losses: mean squared error and (class-weighted) multinomial logistic."""

from __future__ import annotations

from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy.special import log_softmax

from permutofilt.errors import LabelOutOfRangeError, ParameterError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray, IntArray


class LossKind(str, Enum):
    """Loss functions selectable from a training config."""

    MSE = "mse"
    LOGISTIC = "logistic"
    WEIGHTED_LOGISTIC = "weighted_logistic"


def mse_loss(pred: npt.ArrayLike, target: npt.ArrayLike) -> tuple[float, FloatArray]:
    """``(1/(n c)) sum (pred - target)^2`` and its gradient with respect to ``pred``."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatchError(f"prediction is {p.shape}, target is {t.shape}")
    diff = p - t
    size = max(diff.size, 1)
    return float(np.sum(diff**2) / size), 2.0 * diff / size


def check_labels(labels: npt.ArrayLike, num_labels: int) -> IntArray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ShapeMismatchError(f"labels must be 1-D, got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise LabelOutOfRangeError(f"labels must be integers, got dtype {y.dtype}")
    if y.size and (y.min() < 0 or y.max() >= num_labels):
        raise LabelOutOfRangeError(
            f"labels must lie in [0, {num_labels}), got range [{y.min()}, {y.max()}]"
        )
    return y.astype(np.int64)


def logistic_loss(
    scores: npt.ArrayLike,
    labels: npt.ArrayLike,
    weights: npt.ArrayLike | None = None,
) -> tuple[float, FloatArray]:
    """Softmax cross-entropy averaged over points, optionally weighted per true class.

    The gradient is ``(softmax - onehot) * w[label] / n``.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeMismatchError(f"scores must be (n, L), got {s.shape}")
    n, num_labels = s.shape
    y = check_labels(labels, num_labels)
    if y.shape[0] != n:
        raise ShapeMismatchError(f"{n} score rows but {y.shape[0]} labels")
    if weights is None:
        w = np.ones(n)
    else:
        cw = np.asarray(weights, dtype=np.float64)
        if cw.shape != (num_labels,):
            raise ShapeMismatchError(f"need {num_labels} class weights, got shape {cw.shape}")
        if np.any(cw <= 0):
            raise ParameterError("class weights must be > 0")
        w = cw[y]
    logp = log_softmax(s, axis=1)
    rows = np.arange(n)
    loss = float(-np.sum(w * logp[rows, y]) / max(n, 1))
    grad = np.exp(logp)
    grad[rows, y] -= 1.0
    grad *= w[:, np.newaxis] / max(n, 1)
    return loss, grad


def inverse_frequency_weights(labels: npt.ArrayLike, num_labels: int) -> FloatArray:
    """Class weights proportional to the inverse class frequency, with mean weight 1.

    Classes that never occur get the largest observed weight.
    """
    y = check_labels(labels, num_labels)
    counts = np.bincount(y, minlength=num_labels).astype(np.float64)
    present = counts > 0
    if not np.any(present):
        return np.ones(num_labels)
    inv = np.zeros(num_labels)
    inv[present] = 1.0 / counts[present]
    inv[~present] = inv[present].max()
    return inv * num_labels / inv.sum()
