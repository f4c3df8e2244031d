"""Training, kernel and CRF configuration, key=value config files and task presets."""

from __future__ import annotations

import logging
import os
import re
from collections.abc import Mapping
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError, field_validator

from permutofilt.errors import ConfigError
from permutofilt.training.losses import LossKind

logger = logging.getLogger(__name__)

ENV_PREFIX = "PERMUTOFILT_"

_KERNEL_KEY = re.compile(r"^kernel\.(\d+)\.(\w+)$")


class FeatureKind(str, Enum):
    """Per-pixel feature spaces built from an image."""

    POSITION = "xy"
    POSITION_INTENSITY = "xyv"
    POSITION_COLOR = "xyrgb"

    @classmethod
    def parse(cls, value: str | FeatureKind) -> FeatureKind:
        if isinstance(value, FeatureKind):
            return value
        aliases = {
            "position": cls.POSITION,
            "position+intensity": cls.POSITION_INTENSITY,
            "xyi": cls.POSITION_INTENSITY,
            "position+color": cls.POSITION_COLOR,
        }
        key = value.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown feature kind {value!r}, expected {choices}") from None

    @property
    def dim(self) -> int:
        return {"xy": 2, "xyv": 3, "xyrgb": 5}[self.value]


def _split_floats(value: Any) -> Any:
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    if isinstance(value, int | float):
        return [float(value)]
    return value


class TrainingConfig(BaseModel):
    """SGD training settings."""

    lr: float = Field(default=0.02, ge=0.0, description="Fixed learning rate")
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0, description="SGD momentum")
    weight_decay: float = Field(default=5e-4, ge=0.0, description="Weight decay on filter taps")
    epochs: int = Field(default=15, ge=0, description="Number of passes over the training set")
    batch: int = Field(default=1, ge=1, description="Samples per parameter update")
    loss: LossKind = Field(default=LossKind.MSE, description="Training loss")
    seed: int = Field(default=0, ge=0, description="Seed for batch order and synthetic data")
    feature_scales: list[float] | None = Field(
        default=None, description="Diagonal feature scales, one per feature dimension"
    )
    class_weights: list[float] | None = Field(
        default=None, description="Per-class weights for the weighted logistic loss"
    )

    @field_validator("feature_scales", "class_weights", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split_floats(value)


class KernelConfig(BaseModel):
    """One pairwise kernel of a CRF."""

    features: FeatureKind = Field(default=FeatureKind.POSITION_COLOR, description="Feature space")
    scales: list[float] = Field(
        default_factory=lambda: [1 / 80, 1 / 13], description="Feature scales"
    )
    weight: float = Field(default=10.0, description="Kernel weight")
    s: int = Field(default=1, ge=0, description="Filter neighborhood in lattice hops")
    sigma: float = Field(default=1.0, gt=0.0, description="Gaussian initialization width in hops")
    filter: Path | None = Field(default=None, description="PBF1 file with learned taps")

    @field_validator("scales", mode="before")
    @classmethod
    def _split_scales(cls, value: Any) -> Any:
        return _split_floats(value)

    @field_validator("features", mode="before")
    @classmethod
    def _parse_kind(cls, value: Any) -> FeatureKind:
        return FeatureKind.parse(value)


def default_kernels() -> list[KernelConfig]:
    """Appearance plus smoothness kernels in the usual dense-CRF arrangement."""
    return [
        KernelConfig(features=FeatureKind.POSITION_COLOR, scales=[1 / 80, 1 / 13], weight=10.0),
        KernelConfig(features=FeatureKind.POSITION, scales=[1 / 3], weight=3.0),
    ]


class CrfConfig(BaseModel):
    """Mean-field inference settings."""

    steps: int = Field(default=5, ge=1, description="Mean-field iterations")
    loose: bool = Field(default=False, description="Separate kernels per step")
    exclude_self: bool = Field(default=False, description="Drop the self term from messages")
    normalize: bool = Field(default=False, description="Normalize filter responses")
    kernels: list[KernelConfig] = Field(default_factory=default_kernels)


class TaskPreset(BaseModel):
    """Protocol of one experiment: feature space, scales, filter size and training constants."""

    features: str = Field(description="Feature space name")
    scales: list[float] = Field(description="Feature scales per feature group")
    s: int = Field(description="Filter neighborhood in lattice hops")
    loss: LossKind
    lr: float
    batch: int
    epochs: float


TASK_PRESETS: dict[str, TaskPreset] = {
    "color_upsampling_2x": TaskPreset(
        features="xyv", scales=[0.13, 0.17], s=2, loss=LossKind.MSE, lr=1e-6, batch=200, epochs=94.5
    ),
    "color_upsampling_4x": TaskPreset(
        features="xyv", scales=[0.06, 0.17], s=2, loss=LossKind.MSE, lr=1e-6, batch=200, epochs=94.5
    ),
    "color_upsampling_8x": TaskPreset(
        features="xyv", scales=[0.03, 0.17], s=2, loss=LossKind.MSE, lr=1e-6, batch=200, epochs=94.5
    ),
    "color_upsampling_16x": TaskPreset(
        features="xyv", scales=[0.02, 0.17], s=2, loss=LossKind.MSE, lr=1e-6, batch=200, epochs=94.5
    ),
    "depth_upsampling": TaskPreset(
        features="xyrgb",
        scales=[0.05, 0.02],
        s=2,
        loss=LossKind.MSE,
        lr=1e-7,
        batch=50,
        epochs=251.6,
    ),
    "mesh_denoising": TaskPreset(
        features="isomap4", scales=[46.0], s=2, loss=LossKind.MSE, lr=100.0, batch=10, epochs=100.0
    ),
    "semantic_segmentation": TaskPreset(
        features="xyrgb;xy",
        scales=[0.01, 0.34, 0.34],
        s=2,
        loss=LossKind.LOGISTIC,
        lr=0.1,
        batch=5,
        epochs=1.4,
    ),
    "material_segmentation": TaskPreset(
        features="xyrgb",
        scales=[5.0, 0.05, 0.30],
        s=2,
        loss=LossKind.WEIGHTED_LOGISTIC,
        lr=1e-4,
        batch=12,
        epochs=2.6,
    ),
    "image_denoising": TaskPreset(
        features="xyv", scales=[0.5, 0.025], s=2, loss=LossKind.MSE, lr=0.02, batch=1, epochs=15.0
    ),
}


def expand_scales(kind: FeatureKind, scales: list[float]) -> list[float]:
    """Per-dimension scales from one value, one value per group (position, photometric), or all."""
    dim = kind.dim
    if len(scales) == dim:
        return list(scales)
    if len(scales) == 1:
        return scales * dim
    if len(scales) == 2 and dim > 2:
        return [scales[0]] * 2 + [scales[1]] * (dim - 2)
    raise ConfigError(f"{kind.value} features take 1, 2 or {dim} scales, got {len(scales)}")


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment and blank lines are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def load_key_values(path: str | Path) -> dict[str, str]:
    p = Path(path)
    return parse_key_values(p.read_text(encoding="utf-8"), source=str(p))


TRAINING_KEYS = frozenset(TrainingConfig.model_fields)
CRF_KEYS = frozenset(CrfConfig.model_fields) - {"kernels"}


def check_keys(values: Mapping[str, str], allowed: frozenset[str]) -> None:
    unknown = sorted(k for k in values if k not in allowed and not _KERNEL_KEY.match(k))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _validated(model: type[BaseModel], data: Mapping[str, Any]) -> Any:
    try:
        return model.model_validate(dict(data))
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config value for {where}: {first['msg']}") from None


def training_config(values: Mapping[str, str]) -> TrainingConfig:
    config: TrainingConfig = _validated(
        TrainingConfig, {k: v for k, v in values.items() if k in TRAINING_KEYS}
    )
    return config


def crf_config(values: Mapping[str, str]) -> CrfConfig:
    """Build a CRF config; ``kernel.<i>.<field>`` keys declare kernels in index order."""
    kernels: dict[int, dict[str, str]] = {}
    for key, value in values.items():
        match = _KERNEL_KEY.match(key)
        if match:
            kernels.setdefault(int(match.group(1)), {})[match.group(2)] = value
    data: dict[str, Any] = {k: v for k, v in values.items() if k in CRF_KEYS}
    if kernels:
        data["kernels"] = [kernels[i] for i in sorted(kernels)]
    config: CrfConfig = _validated(CrfConfig, data)
    return config


def env_overrides(dests: list[str], environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Values of ``PERMUTOFILT_<DEST>`` variables for the given option destinations."""
    env = os.environ if environ is None else environ
    found = {}
    for dest in dests:
        name = ENV_PREFIX + dest.upper()
        if name in env:
            found[dest] = env[name]
            logger.debug("option %s taken from %s", dest, name)
    return found
