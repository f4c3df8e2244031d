"""Denoising of per-vertex 3-D displacements over precomputed embedding features."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from permutofilt.config import TASK_PRESETS, TrainingConfig
from permutofilt.errors import EmptyDatasetError
from permutofilt.io import PointCloudSignal
from permutofilt.lattice.core import FloatArray
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import Signal, build_operators, filter_signal
from permutofilt.pipelines.fitting import FilterSample, fit_filter
from permutofilt.pipelines.images import rmse
from permutofilt.pipelines.reporting import EvaluationRow

logger = logging.getLogger(__name__)

DEFAULT_SCALE = TASK_PRESETS["mesh_denoising"].scales[0]


def mesh_denoise(
    noisy: PointCloudSignal,
    bank: FilterBank,
    scales: npt.ArrayLike = DEFAULT_SCALE,
    normalize: bool = True,
    threads: int = 1,
) -> FloatArray:
    """Splat the displacements into the embedding space, filter, and slice back at the vertices."""
    signal = Signal(values=noisy.values, features=noisy.features)
    out = filter_signal(signal, None, scales, bank, normalize=normalize, threads=threads)
    logger.info("mesh denoise: %d vertices, %d channels", signal.n, out.shape[1])
    return out


def mesh_train(
    pairs: Sequence[tuple[PointCloudSignal, FloatArray]],
    scales: npt.ArrayLike,
    s: int,
    config: TrainingConfig,
    sigma: float = 1.0,
    threads: int = 1,
) -> FilterBank:
    """Learn a scalar filter from (noisy signal, clean displacements) pairs."""
    if not pairs:
        raise EmptyDatasetError("mesh_train needs at least one (noisy, clean) pair")
    samples = [
        FilterSample(
            ops=build_operators(noisy.features, scales, s), values=noisy.values, target=clean
        )
        for noisy, clean in pairs
    ]
    d = int(pairs[0][0].features.shape[1])
    fit = fit_filter(samples, gaussian_init(d, s, sigma), config, normalize=True, threads=threads)
    return fit.bank


def mesh_report(
    pairs: Sequence[tuple[PointCloudSignal, FloatArray]],
    scales: npt.ArrayLike,
    banks: dict[str, FilterBank],
    threads: int = 1,
) -> list[EvaluationRow]:
    """RMSE of the noisy input and of every named filter against the clean displacements."""
    rows: list[EvaluationRow] = []
    for i, (noisy, clean) in enumerate(pairs):
        name = f"sample_{i:03d}"
        rows.append(EvaluationRow(method="Noisy", sample=name, value=rmse(noisy.values, clean)))
        for method, bank in banks.items():
            out = mesh_denoise(noisy, bank, scales, threads=threads)
            error = rmse(out, np.asarray(clean))
            rows.append(EvaluationRow(method=method, sample=name, value=error))
    return rows
