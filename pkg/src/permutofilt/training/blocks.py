"""Scalar-loss wrappers around the differentiable operators, for gradient checking."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum

import numpy as np

from permutofilt.crf.kernels import LatticeKernel
from permutofilt.crf.meanfield import mf_backward, mf_run
from permutofilt.errors import ParameterError
from permutofilt.inception.gram import build_grams, inception_backward, inception_forward
from permutofilt.lattice.core import FloatArray, filter_size
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import (
    LatticeOperators,
    build_operators,
    forward,
    grad_filter,
    grad_input,
    normalized_forward,
    normalized_grad_filter,
    normalized_grad_input,
)


LossAndGrads = tuple[float, dict[str, FloatArray]]


class GradTarget(str, Enum):
    """Blocks the ``gradcheck`` command can probe."""

    INPUT = "input"
    FILTER = "filter"
    NORMALIZED = "normalized"
    CRF = "crf"
    INCEPTION = "inception"


@dataclass
class PermutoBlock:
    """``0.5 * |forward(x, B)|^2`` with respect to the signal ``x`` and the taps."""

    ops: LatticeOperators
    bank: FilterBank
    x: FloatArray

    def parameters(self) -> dict[str, FloatArray]:
        return {"x": self.x, "taps": self.bank.weights}

    def loss_and_grads(self, params: Mapping[str, FloatArray]) -> LossAndGrads:
        bank = self.bank.with_weights(params["taps"])
        out = forward(params["x"], self.ops, bank)
        return 0.5 * float(np.sum(out**2)), {
            "x": grad_input(out, self.ops, bank),
            "taps": grad_filter(out, params["x"], self.ops, bank),
        }


@dataclass
class NormalizedBlock:
    """``<r, F_B(x) / F_B(1)>`` for a fixed random projection ``r``."""

    ops: LatticeOperators
    bank: FilterBank
    x: FloatArray
    projection: FloatArray

    def parameters(self) -> dict[str, FloatArray]:
        return {"x": self.x, "taps": self.bank.weights}

    def loss_and_grads(self, params: Mapping[str, FloatArray]) -> LossAndGrads:
        bank = self.bank.with_weights(params["taps"])
        out = normalized_forward(params["x"], self.ops, bank)
        r = self.projection
        return float(np.sum(r * out.values)), {
            "x": normalized_grad_input(r, out, self.ops, bank),
            "taps": normalized_grad_filter(r, params["x"], out, self.ops, bank),
        }


@dataclass
class CrfBlock:
    """``<r, Q_T>`` after ``steps`` mean-field updates with one lattice kernel."""

    ops: LatticeOperators
    bank: FilterBank
    unaries: FloatArray
    projection: FloatArray
    weight: float = 1.0
    steps: int = 2
    exclude_self: bool = False
    normalize: bool = False

    def parameters(self) -> dict[str, FloatArray]:
        labels = self.unaries.shape[1]
        return {
            "unaries": self.unaries,
            "taps": self.bank.weights,
            "weight": np.asarray(self.weight),
            "compat": 1.0 - np.eye(labels),
        }

    def loss_and_grads(self, params: Mapping[str, FloatArray]) -> LossAndGrads:
        kernel = LatticeKernel(
            ops=self.ops,
            bank=self.bank.with_weights(params["taps"]),
            weight=float(params["weight"]),
            normalize=self.normalize,
        )
        state = mf_run(
            params["unaries"],
            [kernel],
            compat=params["compat"],
            steps=self.steps,
            exclude_self=self.exclude_self,
            record=True,
        )
        g = mf_backward(self.projection, state)
        taps = g.filters[0][0]
        assert taps is not None
        return float(np.sum(self.projection * state.q)), {
            "unaries": g.unaries,
            "taps": taps,
            "weight": np.asarray(g.kernel_weights[0][0]),
            "compat": g.compat,
        }


@dataclass
class InceptionBlock:
    """``<r, zbar>`` for a multi-scale gram-kernel module."""

    features_in: FloatArray
    features_out: FloatArray
    z: FloatArray
    w: FloatArray
    thetas: FloatArray
    transform: FloatArray
    projection: FloatArray

    def parameters(self) -> dict[str, FloatArray]:
        return {"z": self.z, "w": self.w, "thetas": self.thetas, "transform": self.transform}

    def loss_and_grads(self, params: Mapping[str, FloatArray]) -> LossAndGrads:
        kernels = build_grams(
            self.features_in, self.features_out, params["transform"], params["thetas"].tolist()
        )
        out = inception_forward(params["z"], kernels, params["w"])
        g = inception_backward(self.projection, params["z"], kernels, params["w"])
        return float(np.sum(self.projection * out)), {
            "z": g.z,
            "w": g.w,
            "thetas": g.thetas,
            "transform": g.transform,
        }


def random_bank(
    rng: np.random.Generator, d: int, s: int, c_out: int = 1, c_in: int = 1
) -> FilterBank:
    base = gaussian_init(d, s, 1.0).weights
    w = base + 0.1 * rng.standard_normal((c_out, c_in, base.shape[2])) * base.max()
    return FilterBank(weights=w, d=d, s=s)


def make_block(
    target: GradTarget, d: int = 2, s: int = 1, n: int = 12, seed: int = 0
) -> PermutoBlock | NormalizedBlock | CrfBlock | InceptionBlock:
    """A random instance of ``target`` on ``n`` points with ``d``-dimensional features."""
    rng = np.random.default_rng(seed)
    features = rng.uniform(0.0, 2.0, size=(n, d))
    match target:
        case GradTarget.INPUT | GradTarget.FILTER:
            shifted = features + 0.3 * rng.standard_normal((n, d))
            ops = build_operators(features, 1.0, s, features_out=shifted)
            bank = FilterBank(weights=rng.standard_normal((2, 2, filter_size(d, s))), d=d, s=s)
            return PermutoBlock(ops=ops, bank=bank, x=rng.standard_normal((n, 2)))
        case GradTarget.NORMALIZED:
            ops = build_operators(features, 1.0, s)
            return NormalizedBlock(
                ops=ops,
                bank=random_bank(rng, d, s),
                x=rng.standard_normal((n, 2)),
                projection=rng.standard_normal((n, 2)),
            )
        case GradTarget.CRF:
            labels = 3
            return CrfBlock(
                ops=build_operators(features, 1.0, s),
                bank=random_bank(rng, d, s),
                unaries=rng.standard_normal((n, labels)),
                projection=rng.standard_normal((n, labels)),
                exclude_self=True,
            )
        case GradTarget.INCEPTION:
            channels = 2
            thetas = np.array([1.0, 0.3])
            return InceptionBlock(
                features_in=features,
                features_out=rng.uniform(0.0, 2.0, size=(n // 2 + 1, d)),
                z=rng.standard_normal((n, channels)),
                w=rng.standard_normal((thetas.size, channels)),
                thetas=thetas,
                transform=np.eye(d) + 0.1 * rng.standard_normal((d, d)),
                projection=rng.standard_normal((n // 2 + 1, channels)),
            )
    raise ParameterError(f"unknown gradient target {target}")
