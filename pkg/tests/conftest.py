"""Shared fixtures."""

import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rgb_png(tmp_path):
    """An 8x8 RGB image with a vertical edge, written as PNG."""
    pixels = np.zeros((8, 8, 3), dtype=np.uint8)
    pixels[:, :4] = (40, 60, 200)
    pixels[:, 4:] = (220, 180, 30)
    path = tmp_path / "edge.png"
    Image.fromarray(pixels).save(path)
    return path


@pytest.fixture
def gray_png(tmp_path):
    """A 16x16 gray image with two flat halves, written as PNG."""
    pixels = np.full((16, 16), 50, dtype=np.uint8)
    pixels[:, 8:] = 200
    path = tmp_path / "halves.png"
    Image.fromarray(pixels).save(path)
    return path
