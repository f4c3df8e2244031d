"""Central finite-difference checks for any block exposing analytic gradients."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from typing import Protocol

import numpy as np
from pydantic import BaseModel, Field

from permutofilt.lattice.core import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5


class Differentiable(Protocol):
    """A scalar-valued block with named parameter tensors."""

    def parameters(self) -> dict[str, FloatArray]: ...

    def loss_and_grads(
        self, params: Mapping[str, FloatArray]
    ) -> tuple[float, dict[str, FloatArray]]: ...


class ProbeResult(BaseModel):
    """One probed coordinate."""

    param: str = Field(description="Parameter tensor name")
    index: int = Field(description="Flat index into the parameter tensor")
    analytic: float = Field(description="Analytic derivative")
    numeric: float = Field(description="Central-difference derivative")
    rel_err: float = Field(description="Relative error between the two")


class GradCheckReport(BaseModel):
    """Outcome of a gradient check."""

    target: str = Field(default="block", description="Name of the checked block")
    tolerance: float = Field(description="Relative error above which a probe fails")
    max_rel_err: float = Field(default=0.0, description="Largest relative error over all probes")
    failures: int = Field(default=0, description="Number of probes above tolerance")
    probes: list[ProbeResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def merge(self, other: GradCheckReport) -> GradCheckReport:
        return GradCheckReport(
            target=self.target,
            tolerance=self.tolerance,
            max_rel_err=max(self.max_rel_err, other.max_rel_err),
            failures=self.failures + other.failures,
            probes=[*self.probes, *other.probes],
        )


def relative_error(analytic: float, numeric: float, scale: float) -> float:
    """``|a - n| / max(|a|, |n|, 1e-4 * scale)``; zero when both derivatives vanish."""
    denom = max(abs(analytic), abs(numeric), 1e-4 * scale)
    if denom == 0.0:
        return 0.0
    return abs(analytic - numeric) / denom


def grad_check(
    block: Differentiable,
    probes: int = 20,
    h: float = DEFAULT_STEP,
    seed: int = 0,
    tolerance: float = 1e-5,
    names: list[str] | None = None,
    target: str = "block",
) -> GradCheckReport:
    """Compare analytic gradients with central differences on randomly probed coordinates.

    Each checked tensor gets up to ``probes`` distinct coordinates; the step is
    ``h * max(1, max|param|)``.
    """
    rng = np.random.default_rng(seed)
    base = {k: np.array(v, dtype=np.float64) for k, v in block.parameters().items()}
    _, analytic = block.loss_and_grads(base)
    report = GradCheckReport(target=target, tolerance=tolerance)
    for name in names if names is not None else sorted(base):
        value = base[name]
        grad = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        scale = float(np.max(np.abs(grad))) if grad.size else 0.0
        step = h * max(1.0, float(np.max(np.abs(value))) if value.size else 1.0)
        count = min(probes, value.size)
        for idx in rng.choice(value.size, size=count, replace=False):
            i = int(idx)
            numeric = _central_difference(block, base, name, i, step)
            err = relative_error(float(grad[i]), numeric, scale)
            report.probes.append(
                ProbeResult(
                    param=name, index=i, analytic=float(grad[i]), numeric=numeric, rel_err=err
                )
            )
            report.max_rel_err = max(report.max_rel_err, err)
            if err > tolerance:
                report.failures += 1
                logger.debug("%s[%d]: analytic %.6e numeric %.6e", name, i, grad[i], numeric)
    logger.info(
        "gradcheck %s: %d probes, max rel err %.3e, %d failures",
        target,
        len(report.probes),
        report.max_rel_err,
        report.failures,
    )
    return report


def _central_difference(
    block: Differentiable, base: dict[str, FloatArray], name: str, index: int, step: float
) -> float:
    shifted = dict(base)
    values = []
    for sign in (1.0, -1.0):
        probe = base[name].copy()
        probe.reshape(-1)[index] += sign * step
        shifted[name] = probe
        loss, _ = block.loss_and_grads(shifted)
        values.append(loss)
    return (values[0] - values[1]) / (2.0 * step)
