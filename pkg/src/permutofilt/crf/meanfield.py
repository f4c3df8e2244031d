"""Mean-field inference for fully connected CRFs and reverse-mode through the unrolled steps.

One step computes ``Q'_i(l) ∝ exp(-psi_u(l) - sum_l' mu(l, l') sum_m w_m M_m(i, l'))`` where
``M_m = K_m Q`` is the message of kernel ``m``, optionally without the self term ``K_m[i, i] Q_i``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import softmax

from permutofilt.crf.kernels import PairwiseFilter
from permutofilt.errors import ParameterError, ShapeMismatchError, StateMissingError
from permutofilt.lattice.core import FloatArray

logger = logging.getLogger(__name__)


def potts(num_labels: int) -> FloatArray:
    """Potts compatibility: 1 between distinct labels, 0 on the diagonal."""
    if num_labels < 1:
        raise ParameterError(f"number of labels must be >= 1, got {num_labels}")
    return 1.0 - np.eye(num_labels)


@dataclass
class MeanFieldTrace:
    """Intermediate quantities of a recorded run, consumed by ``mf_backward``."""

    schedule: list[list[PairwiseFilter]]
    compat: FloatArray
    exclude_self: bool
    loose: bool
    states: list[FloatArray] = field(default_factory=list)
    messages: list[list[FloatArray]] = field(default_factory=list)
    pairwise: list[FloatArray] = field(default_factory=list)
    logits: list[FloatArray] = field(default_factory=list)


@dataclass
class MarginalState:
    """Row-stochastic label marginals ``q`` (n, L)."""

    q: FloatArray
    trace: MeanFieldTrace | None = None

    @property
    def labels(self) -> npt.NDArray[np.int64]:
        return np.argmax(self.q, axis=1).astype(np.int64)


@dataclass
class MeanFieldGrads:
    """Gradients of a scalar loss through ``mf_run``.

    ``filters[k][m]`` and ``kernel_weights[k][m]`` belong to kernel ``m`` of kernel set ``k``
    (one set unless the run was loose). Dense kernels report ``None`` filter gradients.
    """

    unaries: FloatArray
    compat: FloatArray
    filters: list[list[FloatArray | None]]
    kernel_weights: list[FloatArray]


def _check_unaries(unaries: npt.ArrayLike) -> FloatArray:
    u = np.asarray(unaries, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] < 1:
        raise ShapeMismatchError(f"unaries must be (n, L), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ParameterError("unaries contain non-finite values")
    return u


def mf_init(unaries: npt.ArrayLike) -> MarginalState:
    """``Q = softmax(-psi_u)`` row-wise."""
    u = _check_unaries(unaries)
    return MarginalState(q=softmax(-u, axis=1))


def _message(
    kernel: PairwiseFilter, q: FloatArray, exclude_self: bool
) -> FloatArray:
    msg = kernel.filter(q)
    if exclude_self:
        msg = msg - kernel.self_weights()[:, np.newaxis] * q
    return msg


def _step(
    q: FloatArray,
    unaries: FloatArray,
    kernels: Sequence[PairwiseFilter],
    compat: FloatArray,
    exclude_self: bool,
) -> tuple[FloatArray, list[FloatArray], FloatArray, FloatArray]:
    n, num_labels = unaries.shape
    if q.shape != unaries.shape:
        raise ShapeMismatchError(f"marginals are {q.shape}, unaries are {unaries.shape}")
    if compat.shape != (num_labels, num_labels):
        expected = (num_labels, num_labels)
        raise ShapeMismatchError(f"compatibility must be {expected}, got {compat.shape}")
    messages = []
    pairwise = np.zeros_like(q)
    for kernel in kernels:
        if kernel.n != n:
            raise ShapeMismatchError(f"kernel covers {kernel.n} points, unaries have {n}")
        msg = _message(kernel, q, exclude_self)
        messages.append(msg)
        pairwise += kernel.weight * msg
    logits = -unaries - pairwise @ compat.T
    return softmax(logits, axis=1), messages, pairwise, logits


def mf_step(
    state: MarginalState,
    unaries: npt.ArrayLike,
    kernels: Sequence[PairwiseFilter],
    compat: npt.ArrayLike,
    exclude_self: bool = False,
) -> MarginalState:
    """One mean-field update; the result is row-normalized in log space."""
    u = _check_unaries(unaries)
    q, _, _, _ = _step(state.q, u, kernels, np.asarray(compat, dtype=np.float64), exclude_self)
    return MarginalState(q=q)


def _schedule(
    kernels: Sequence[PairwiseFilter] | Sequence[Sequence[PairwiseFilter]], steps: int, loose: bool
) -> list[list[PairwiseFilter]]:
    if not loose:
        flat = list(kernels)
        return [flat for _ in range(steps)]
    sets = [list(ks) for ks in kernels]  # type: ignore[union-attr]
    if len(sets) != steps:
        raise ShapeMismatchError(f"loose mean-field needs {steps} kernel sets, got {len(sets)}")
    return sets


def mf_run(
    unaries: npt.ArrayLike,
    kernels: Sequence[PairwiseFilter] | Sequence[Sequence[PairwiseFilter]],
    compat: npt.ArrayLike | None = None,
    steps: int = 5,
    loose: bool = False,
    exclude_self: bool = False,
    record: bool = False,
) -> MarginalState:
    """Run ``steps`` mean-field updates from ``mf_init``.

    In loose mode ``kernels`` holds one kernel list per step. With ``record`` the returned state
    carries the trace needed by ``mf_backward``.
    """
    if steps < 1:
        raise ParameterError(f"mean-field needs steps >= 1, got {steps}")
    u = _check_unaries(unaries)
    mu = potts(u.shape[1]) if compat is None else np.asarray(compat, dtype=np.float64)
    schedule = _schedule(kernels, steps, loose)
    trace = MeanFieldTrace(schedule=schedule, compat=mu, exclude_self=exclude_self, loose=loose)
    q = mf_init(u).q
    trace.states.append(q)
    for t, step_kernels in enumerate(schedule):
        q, messages, pairwise, logits = _step(q, u, step_kernels, mu, exclude_self)
        if record:
            trace.states.append(q)
            trace.messages.append(messages)
            trace.pairwise.append(pairwise)
            trace.logits.append(logits)
        confidence = float(q.max(axis=1).mean())
        logger.debug("mean-field step %d: mean max marginal %.4f", t + 1, confidence)
    return MarginalState(q=q, trace=trace if record else None)


def _softmax_backward(q: FloatArray, grad_q: FloatArray) -> FloatArray:
    return q * (grad_q - np.sum(grad_q * q, axis=1, keepdims=True))


def mf_backward(
    grad_q: npt.ArrayLike,
    state: MarginalState,
    grad_logits: npt.ArrayLike | None = None,
) -> MeanFieldGrads:
    """Reverse-mode through a recorded ``mf_run``.

    ``grad_q`` is the loss gradient on the final marginals; ``grad_logits`` optionally adds a
    gradient on the final step's pre-softmax scores.
    """
    trace = state.trace
    if trace is None or len(trace.states) != len(trace.schedule) + 1:
        raise StateMissingError("mf_backward needs a state from mf_run(..., record=True)")
    g = np.array(grad_q, dtype=np.float64)
    if g.shape != state.q.shape:
        raise ShapeMismatchError(f"gradient is {g.shape}, marginals are {state.q.shape}")
    mu = trace.compat
    num_sets = len(trace.schedule) if trace.loose else 1
    filters: list[list[FloatArray | None]] = [
        [None] * len(trace.schedule[k]) for k in range(num_sets)
    ]
    kernel_weights = [np.zeros(len(trace.schedule[k])) for k in range(num_sets)]
    g_unaries = np.zeros_like(g)
    g_compat = np.zeros_like(mu)

    for t in reversed(range(len(trace.schedule))):
        q_next = trace.states[t + 1]
        q_prev = trace.states[t]
        g_logits = _softmax_backward(q_next, g)
        if grad_logits is not None and t == len(trace.schedule) - 1:
            g_logits = g_logits + np.asarray(grad_logits, dtype=np.float64)
        g_unaries -= g_logits
        g_pair = -g_logits @ mu
        g_compat -= g_logits.T @ trace.pairwise[t]
        g_prev = np.zeros_like(g)
        k = t if trace.loose else 0
        for m, kernel in enumerate(trace.schedule[t]):
            kernel_weights[k][m] += float(np.sum(g_pair * trace.messages[t][m]))
            g_msg = kernel.weight * g_pair
            g_prev += kernel.filter_transpose(g_msg)
            bank = kernel.bank_grad(g_msg, q_prev)
            if trace.exclude_self:
                g_prev -= kernel.self_weights()[:, np.newaxis] * g_msg
                self_grad = kernel.self_weights_grad(np.sum(g_msg * q_prev, axis=1))
                if bank is not None and self_grad is not None:
                    bank = bank - self_grad
            if bank is not None:
                current = filters[k][m]
                filters[k][m] = bank if current is None else current + bank
        g = g_prev

    g_unaries -= _softmax_backward(trace.states[0], g)
    return MeanFieldGrads(
        unaries=g_unaries, compat=g_compat, filters=filters, kernel_weights=kernel_weights
    )
