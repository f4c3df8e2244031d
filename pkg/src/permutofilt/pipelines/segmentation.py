"""CRF refinement of per-pixel unaries and filter learning through unrolled mean-field."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from permutofilt.config import CrfConfig, FeatureKind, KernelConfig, TrainingConfig, expand_scales
from permutofilt.crf.kernels import LatticeKernel, PairwiseFilter
from permutofilt.crf.meanfield import MarginalState, mf_backward, mf_run
from permutofilt.errors import EmptyDatasetError, ShapeMismatchError, StateMissingError
from permutofilt.lattice.core import FloatArray, IntArray
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import LatticeOperators, build_operators
from permutofilt.pipelines.images import ImageBuffer, raw_features
from permutofilt.training.losses import LossKind, inverse_frequency_weights, logistic_loss
from permutofilt.training.sgd import SgdState, batch_order, sgd_step

logger = logging.getLogger(__name__)


def image_feature_sets(img: ImageBuffer, config: CrfConfig) -> dict[FeatureKind, FloatArray]:
    """Unscaled features of every kind the configured kernels use."""
    return {k.features: raw_features(img, k.features) for k in config.kernels}


def initial_bank(kernel: KernelConfig) -> FilterBank:
    """Taps from the kernel's PBF1 file, or a Gaussian of width ``sigma`` hops."""
    if kernel.filter is not None:
        bank = FilterBank.load(kernel.filter)
        if bank.d != kernel.features.dim or bank.s != kernel.s:
            raise ShapeMismatchError(
                f"{kernel.filter}: filter is d={bank.d}, s={bank.s}; "
                f"kernel needs d={kernel.features.dim}, s={kernel.s}"
            )
        return bank
    return gaussian_init(kernel.features.dim, kernel.s, kernel.sigma)


@dataclass
class CrfParams:
    """Taps and weight of every kernel, one list per kernel set (one set per step when loose)."""

    banks: list[list[FilterBank]]
    weights: list[list[float]]
    compat: FloatArray

    @classmethod
    def initial(cls, config: CrfConfig, num_labels: int) -> CrfParams:
        sets = config.steps if config.loose else 1
        return cls(
            banks=[[initial_bank(k) for k in config.kernels] for _ in range(sets)],
            weights=[[k.weight for k in config.kernels] for _ in range(sets)],
            compat=1.0 - np.eye(num_labels),
        )


@dataclass
class CrfProblem:
    """Unaries with lattice operators per configured kernel, built once and reused across steps."""

    unaries: FloatArray
    operators: list[LatticeOperators]
    labels: IntArray | None = None

    @classmethod
    def build(
        cls,
        unaries: npt.ArrayLike,
        features: Mapping[FeatureKind, FloatArray],
        config: CrfConfig,
        labels: npt.ArrayLike | None = None,
    ) -> CrfProblem:
        u = np.asarray(unaries, dtype=np.float64)
        operators = []
        for kernel in config.kernels:
            if kernel.features not in features:
                raise ShapeMismatchError(f"no {kernel.features.value} features for a kernel")
            f = features[kernel.features]
            if f.shape[0] != u.shape[0]:
                raise ShapeMismatchError(f"{f.shape[0]} feature rows for {u.shape[0]} unaries")
            scales = expand_scales(kernel.features, kernel.scales)
            operators.append(build_operators(f, scales, kernel.s))
        y = None if labels is None else np.asarray(labels, dtype=np.int64).reshape(-1)
        return cls(unaries=u, operators=operators, labels=y)

    def kernels(
        self, params: CrfParams, config: CrfConfig, threads: int = 1
    ) -> list[list[PairwiseFilter]]:
        sets: list[list[PairwiseFilter]] = []
        for banks, weights in zip(params.banks, params.weights, strict=True):
            sets.append(
                [
                    LatticeKernel(
                        ops=ops, bank=bank, weight=w, normalize=config.normalize, threads=threads
                    )
                    for ops, bank, w in zip(self.operators, banks, weights, strict=True)
                ]
            )
        return sets


def run_problem(
    problem: CrfProblem,
    params: CrfParams,
    config: CrfConfig,
    record: bool = False,
    threads: int = 1,
) -> MarginalState:
    sets = problem.kernels(params, config, threads)
    return mf_run(
        problem.unaries,
        sets if config.loose else sets[0],
        compat=params.compat,
        steps=config.steps,
        loose=config.loose,
        exclude_self=config.exclude_self,
        record=record,
    )


def crf_refine(
    unaries: npt.ArrayLike,
    img: ImageBuffer,
    config: CrfConfig,
    params: CrfParams | None = None,
    threads: int = 1,
) -> MarginalState:
    """Mean-field marginals for per-pixel unaries (h * w, L) over the image's features."""
    u = np.asarray(unaries, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] != img.size:
        raise ShapeMismatchError(f"unaries are {u.shape}, image has {img.size} pixels")
    problem = CrfProblem.build(u, image_feature_sets(img, config), config)
    p = params if params is not None else CrfParams.initial(config, u.shape[1])
    state = run_problem(problem, p, config, threads=threads)
    logger.info("crf: %d pixels, %d labels, %d steps", u.shape[0], u.shape[1], config.steps)
    return state


@dataclass
class CrfTrainResult:
    params: CrfParams
    history: list[float] = field(default_factory=list)


def _loss(
    problem: CrfProblem,
    params: CrfParams,
    config: CrfConfig,
    class_weights: FloatArray | None,
    threads: int,
) -> tuple[float, FloatArray, MarginalState]:
    """Logistic loss on the final step's scores and its gradient with respect to them."""
    if problem.labels is None:
        raise EmptyDatasetError("CRF problem has no labels")
    state = run_problem(problem, params, config, record=True, threads=threads)
    if state.trace is None:
        raise StateMissingError("mean-field run did not record its steps")
    loss, g = logistic_loss(state.trace.logits[-1], problem.labels, class_weights)
    return loss, g, state


def crf_train(
    problems: Sequence[CrfProblem],
    config: CrfConfig,
    training: TrainingConfig,
    params: CrfParams | None = None,
    threads: int = 1,
) -> CrfTrainResult:
    """SGD on filter taps and kernel weights through the unrolled mean-field steps.

    Weight decay applies to the taps only. The weighted logistic loss uses ``class_weights`` from
    the training config, or inverse class frequencies over the training labels.
    """
    labelled = [p for p in problems if p.labels is not None]
    if not labelled:
        raise EmptyDatasetError("crf_train needs at least one labelled problem")
    num_labels = labelled[0].unaries.shape[1]
    current = params if params is not None else CrfParams.initial(config, num_labels)
    class_weights: FloatArray | None = None
    if training.loss is LossKind.WEIGHTED_LOGISTIC:
        if training.class_weights is not None:
            class_weights = np.asarray(training.class_weights, dtype=np.float64)
        else:
            all_labels = np.concatenate([p.labels for p in labelled if p.labels is not None])
            class_weights = inverse_frequency_weights(all_labels, num_labels)

    names = [(k, m) for k in range(len(current.banks)) for m in range(len(current.banks[k]))]
    state = SgdState(
        lr=training.lr,
        momentum=training.momentum,
        weight_decay=training.weight_decay,
        decay=frozenset(f"taps.{k}.{m}" for k, m in names),
    )

    def mean_loss(p: CrfParams) -> float:
        return float(np.mean([_loss(pr, p, config, class_weights, threads)[0] for pr in labelled]))

    result = CrfTrainResult(params=current, history=[mean_loss(current)])
    best = result.history[0]
    for epoch in range(training.epochs):
        for batch in batch_order(len(labelled), training.batch, training.seed, epoch):
            grads = {f"taps.{k}.{m}": np.zeros_like(current.banks[k][m].weights) for k, m in names}
            grads.update({f"weight.{k}.{m}": np.zeros(()) for k, m in names})
            for i in batch:
                problem = labelled[int(i)]
                _, g_logits, mf_state = _loss(problem, current, config, class_weights, threads)
                g = mf_backward(np.zeros_like(mf_state.q), mf_state, grad_logits=g_logits)
                for k, m in names:
                    if g.filters[k][m] is not None:
                        grads[f"taps.{k}.{m}"] += g.filters[k][m] / len(batch)
                    grads[f"weight.{k}.{m}"] += g.kernel_weights[k][m] / len(batch)
            values = {f"taps.{k}.{m}": current.banks[k][m].weights for k, m in names}
            values.update({f"weight.{k}.{m}": np.asarray(current.weights[k][m]) for k, m in names})
            updated = sgd_step(values, grads, state)
            current = CrfParams(
                banks=[
                    [bank.with_weights(updated[f"taps.{k}.{m}"]) for m, bank in enumerate(row)]
                    for k, row in enumerate(current.banks)
                ],
                weights=[
                    [float(updated[f"weight.{k}.{m}"]) for m in range(len(row))]
                    for k, row in enumerate(current.weights)
                ],
                compat=current.compat,
            )
        loss = mean_loss(current)
        result.history.append(loss)
        if np.isfinite(loss) and loss < best:
            best = loss
            result.params = current
        logger.info("crf epoch %d/%d: train loss %.6f", epoch + 1, training.epochs, loss)
    return result


def accuracy(state: MarginalState, labels: npt.ArrayLike) -> float:
    y = np.asarray(labels).reshape(-1)
    return float(np.mean(state.labels == y))
