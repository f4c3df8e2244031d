"""Image buffers, raster I/O, per-pixel feature construction and quality metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image
from pydantic import BaseModel, Field, field_validator

from permutofilt.config import FeatureKind, expand_scales
from permutofilt.errors import RecipeMismatchError, ShapeMismatchError
from permutofilt.io import write_pnm_ascii
from permutofilt.lattice.core import FloatArray

logger = logging.getLogger(__name__)

PSNR_CAP = 99.0
BT601 = np.array([0.299, 0.587, 0.114])
# photometric features are expressed in 8-bit levels
PHOTOMETRIC_RANGE = 255.0


@dataclass(frozen=True)
class ImageBuffer:
    """``pixels`` of shape (h, w, c) with c in {1, 3} and values in [0, 1]."""

    pixels: FloatArray

    def __post_init__(self) -> None:
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim == 2:
            p = p[:, :, np.newaxis]
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ShapeMismatchError(f"image must be (h, w, 1|3), got {p.shape}")
        if p.shape[0] == 0 or p.shape[1] == 0:
            raise ShapeMismatchError(f"image has no pixels: {p.shape}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    @property
    def size(self) -> int:
        return self.height * self.width

    def flat(self) -> FloatArray:
        """Pixel values (h * w, c) in row-major order, pixel index ``y * w + x``."""
        return self.pixels.reshape(-1, self.channels)

    @classmethod
    def from_flat(cls, values: npt.ArrayLike, width: int, height: int) -> ImageBuffer:
        v = np.asarray(values, dtype=np.float64)
        return cls(v.reshape(height, width, -1))

    def clamped(self) -> ImageBuffer:
        return ImageBuffer(np.clip(self.pixels, 0.0, 1.0))

    def gray(self) -> ImageBuffer:
        return to_gray(self)


def to_gray(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma for RGB images; gray images are returned unchanged."""
    if img.channels == 1:
        return img
    return ImageBuffer(img.pixels @ BT601)


def load_image(path: str | Path) -> ImageBuffer:
    """Read PNG or PNM (plain or raw) into [0, 1]; alpha is dropped."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            pixels = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            converted = im.convert("L" if im.mode in ("1", "L", "LA") else "RGB")
            pixels = np.asarray(converted, dtype=np.float64) / 255.0
    logger.debug("loaded %s with shape %s", path, pixels.shape)
    return ImageBuffer(pixels)


def to_uint8(img: ImageBuffer) -> npt.NDArray[np.uint8]:
    q = np.rint(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    return q[:, :, 0] if img.channels == 1 else q


def save_image(path: str | Path, img: ImageBuffer) -> None:
    """Write 8-bit PNG, or plain-text PGM/PPM for ``.pgm``/``.ppm``/``.pnm`` paths."""
    p = Path(path)
    data = to_uint8(img)
    if p.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        write_pnm_ascii(p, data)
    else:
        Image.fromarray(data).save(p)
    logger.info("wrote %s (%dx%d, %d channels)", p, img.width, img.height, img.channels)


class FeatureRecipe(BaseModel):
    """Feature space and per-dimension scales for building pixel features."""

    kind: FeatureKind = Field(default=FeatureKind.POSITION_INTENSITY, description="Feature space")
    scales: list[float] = Field(description="1, 2 (position, photometric) or d scales")

    @field_validator("kind", mode="before")
    @classmethod
    def _parse_kind(cls, value: str | FeatureKind) -> FeatureKind:
        return FeatureKind.parse(value)

    @field_validator("scales")
    @classmethod
    def _positive(cls, value: list[float]) -> list[float]:
        if not value or any(not math.isfinite(v) or v <= 0 for v in value):
            raise ValueError(f"feature scales must be finite and > 0, got {value}")
        return value

    @property
    def dim(self) -> int:
        return self.kind.dim

    def scale_vector(self) -> FloatArray:
        try:
            return np.asarray(expand_scales(self.kind, self.scales))
        except ValueError as e:
            raise RecipeMismatchError(str(e)) from None


def pixel_positions(width: int, height: int) -> FloatArray:
    """(x, y) of every pixel in row-major order."""
    ys, xs = np.mgrid[0:height, 0:width]
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1).astype(np.float64)


def raw_features(
    img: ImageBuffer, kind: FeatureKind, positions: FloatArray | None = None
) -> FloatArray:
    """Unscaled features: pixel positions plus photometric values in 8-bit levels."""
    pos = pixel_positions(img.width, img.height) if positions is None else positions
    match kind:
        case FeatureKind.POSITION:
            return pos
        case FeatureKind.POSITION_INTENSITY:
            return np.hstack([pos, to_gray(img).flat() * PHOTOMETRIC_RANGE])
        case FeatureKind.POSITION_COLOR:
            if img.channels != 3:
                raise RecipeMismatchError("xyrgb features need an RGB image, got a gray one")
            return np.hstack([pos, img.flat() * PHOTOMETRIC_RANGE])
    raise RecipeMismatchError(f"unsupported feature kind {kind}")


def make_features(
    img: ImageBuffer, recipe: FeatureRecipe, positions: FloatArray | None = None
) -> FloatArray:
    """Scaled per-pixel feature vectors (h * w, d); ``positions`` overrides pixel coordinates."""
    return raw_features(img, recipe.kind, positions) * recipe.scale_vector()


def mse(a: ImageBuffer | npt.ArrayLike, b: ImageBuffer | npt.ArrayLike) -> float:
    x = np.asarray(a.pixels if isinstance(a, ImageBuffer) else a, dtype=np.float64)
    y = np.asarray(b.pixels if isinstance(b, ImageBuffer) else b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"cannot compare shapes {x.shape} and {y.shape}")
    return float(np.mean((x - y) ** 2))


def psnr(a: ImageBuffer | npt.ArrayLike, b: ImageBuffer | npt.ArrayLike) -> float:
    """``10 log10(1 / MSE)`` for unit-range images, capped at 99 dB; full frame."""
    err = mse(a, b)
    if err <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / err))


def rmse(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    return math.sqrt(mse(a, b))
