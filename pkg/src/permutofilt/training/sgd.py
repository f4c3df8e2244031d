"""SGD with momentum and weight decay, plus seeded mini-batch ordering."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from permutofilt.errors import ParameterError, ShapeMismatchError
from permutofilt.lattice.core import FloatArray, IntArray

logger = logging.getLogger(__name__)


@dataclass
class SgdState:
    """Velocity per named parameter and the optimizer constants.

    Weight decay only touches the parameters listed in ``decay``.
    """

    lr: float
    momentum: float = 0.9
    weight_decay: float = 5e-4
    decay: frozenset[str] = frozenset()
    velocity: dict[str, FloatArray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.lr < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ParameterError(f"weight decay must be >= 0, got {self.weight_decay}")


def sgd_step(
    params: Mapping[str, npt.ArrayLike],
    grads: Mapping[str, npt.ArrayLike],
    state: SgdState,
) -> dict[str, FloatArray]:
    """One update ``v <- mu v - lr (g + wd theta)``, ``theta <- theta + v``; returns new params."""
    if set(params) != set(grads):
        raise ShapeMismatchError(
            f"parameters {sorted(params)} and gradients {sorted(grads)} do not match"
        )
    updated: dict[str, FloatArray] = {}
    for name, value in params.items():
        theta = np.asarray(value, dtype=np.float64)
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise ShapeMismatchError(
                f"gradient of {name!r} is {g.shape}, parameter is {theta.shape}"
            )
        if name in state.decay and state.weight_decay:
            g = g + state.weight_decay * theta
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(theta)
        elif v.shape != theta.shape:
            raise ShapeMismatchError(
                f"velocity of {name!r} is {v.shape}, parameter is {theta.shape}"
            )
        v = state.momentum * v - state.lr * g
        state.velocity[name] = v
        updated[name] = theta + v
    return updated


def batch_order(n: int, batch: int, seed: int, epoch: int) -> list[IntArray]:
    """Shuffled mini-batches of ``range(n)``, reproducible from ``(seed, epoch)``."""
    if batch < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch}")
    rng = np.random.default_rng([seed, epoch])
    perm = rng.permutation(n)
    return [perm[i : i + batch] for i in range(0, n, batch)]
