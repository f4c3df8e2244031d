"""Tests for configuration parsing and file formats."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from permutofilt.config import (
    TASK_PRESETS,
    FeatureKind,
    check_keys,
    crf_config,
    env_overrides,
    expand_scales,
    load_key_values,
    parse_key_values,
    training_config,
)
from permutofilt.errors import ConfigError, FormatError, ShapeMismatchError
from permutofilt.io import (
    read_point_cloud,
    read_segment_map,
    read_unaries,
    write_label_map,
    write_pnm_ascii,
    write_point_cloud,
    write_unaries,
)
from permutofilt.training.losses import LossKind


class TestKeyValues:
    """Tests for key=value config files."""

    def test_parse_with_comments(self):
        text = "# training\nlr = 0.1\n\nweight-decay=0  # none\n"
        assert parse_key_values(text) == {"lr": "0.1", "weight_decay": "0"}

    def test_missing_separator(self):
        with pytest.raises(ConfigError, match="cfg:2"):
            parse_key_values("lr=1\nepochs\n", source="cfg")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("epochs=3\nloss=logistic\n", encoding="utf-8")
        config = training_config(load_key_values(path))
        assert config.epochs == 3
        assert config.loss is LossKind.LOGISTIC

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="bogus"):
            check_keys({"lr": "1", "bogus": "2"}, frozenset({"lr"}))

    def test_kernel_keys_are_always_allowed(self):
        check_keys({"kernel.0.weight": "3"}, frozenset())


class TestTrainingConfig:
    """Tests for training settings."""

    def test_defaults(self):
        config = training_config({})
        assert (config.momentum, config.weight_decay, config.batch) == (0.9, 5e-4, 1)

    def test_comma_separated_scales(self):
        config = training_config({"feature_scales": "0.5, 0.025"})
        assert config.feature_scales == [0.5, 0.025]

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="momentum"):
            training_config({"momentum": "1.5"})


class TestCrfConfig:
    """Tests for CRF settings and kernel declarations."""

    def test_default_kernels(self):
        config = crf_config({})
        assert [k.features for k in config.kernels] == [
            FeatureKind.POSITION_COLOR,
            FeatureKind.POSITION,
        ]
        assert not config.exclude_self
        assert not config.normalize

    def test_declared_kernels_replace_the_defaults(self):
        config = crf_config(
            {
                "steps": "3",
                "kernel.1.features": "xy",
                "kernel.1.weight": "2",
                "kernel.0.features": "position+intensity",
                "kernel.0.scales": "0.1,0.5",
            }
        )
        assert config.steps == 3
        assert [k.features for k in config.kernels] == [
            FeatureKind.POSITION_INTENSITY,
            FeatureKind.POSITION,
        ]
        assert config.kernels[0].scales == [0.1, 0.5]
        assert config.kernels[1].weight == 2.0

    def test_unknown_feature_kind(self):
        with pytest.raises(ConfigError):
            crf_config({"kernel.0.features": "depth"})


class TestScalesAndPresets:
    """Tests for scale expansion and task presets."""

    def test_expand_by_group(self):
        assert expand_scales(FeatureKind.POSITION_COLOR, [0.1, 0.5]) == [0.1, 0.1, 0.5, 0.5, 0.5]

    def test_expand_single_value(self):
        assert expand_scales(FeatureKind.POSITION, [0.3]) == [0.3, 0.3]

    def test_expand_rejects_wrong_count(self):
        with pytest.raises(ConfigError):
            expand_scales(FeatureKind.POSITION_INTENSITY, [1.0, 2.0, 3.0, 4.0])

    def test_presets(self):
        assert TASK_PRESETS["image_denoising"].scales == [0.5, 0.025]
        assert TASK_PRESETS["mesh_denoising"].s == 2
        assert TASK_PRESETS["material_segmentation"].loss is LossKind.WEIGHTED_LOGISTIC

    def test_env_overrides(self):
        env = {"PERMUTOFILT_LR": "0.5", "OTHER": "x"}
        assert env_overrides(["lr", "epochs"], env) == {"lr": "0.5"}


class TestUnaries:
    """Tests for the binary unary format."""

    def test_roundtrip_at_float32(self, tmp_path, rng):
        u = rng.normal(size=(6, 3))
        path = tmp_path / "u.bin"
        write_unaries(path, u)
        assert path.stat().st_size == 8 + 4 * 18
        assert_array_equal(read_unaries(path), u.astype(np.float32).astype(np.float64))

    def test_truncated(self, tmp_path):
        path = tmp_path / "u.bin"
        write_unaries(path, np.zeros((2, 2)))
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(FormatError):
            read_unaries(path)


class TestPointCloud:
    """Tests for the point-cloud CSV."""

    def test_columns_are_matched_by_name(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("feat_1,value_0,feat_0\n1,2,3\n4,5,6\n", encoding="utf-8")
        cloud = read_point_cloud(path)
        assert_array_equal(cloud.values, [[2.0], [5.0]])
        assert_array_equal(cloud.features, [[3.0, 1.0], [6.0, 4.0]])

    def test_write_then_read(self, tmp_path):
        path = tmp_path / "cloud.csv"
        write_point_cloud(path, np.array([0.5, -1.25]), np.array([[1.0, 2.0], [3.0, 4.0]]))
        cloud = read_point_cloud(path)
        assert_allclose(cloud.values[:, 0], [0.5, -1.25])
        assert cloud.features.shape == (2, 2)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_point_cloud(path)


class TestSegmentAndLabelMaps:
    """Tests for segment maps, label maps and PNM output."""

    def test_plain_segment_csv(self, tmp_path):
        path = tmp_path / "seg.csv"
        path.write_text("segment\n0\n1\n1\n", encoding="utf-8")
        assert read_segment_map(path).tolist() == [0, 1, 1]

    def test_indexed_segment_csv(self, tmp_path):
        path = tmp_path / "seg.csv"
        path.write_text("2,5\n0,3\n1,4\n", encoding="utf-8")
        assert read_segment_map(path).tolist() == [3, 4, 5]

    def test_label_map_csv(self, tmp_path):
        path = tmp_path / "labels.csv"
        write_label_map(path, np.array([2, 0, 1, 1]), 2, 2)
        assert read_segment_map(path).tolist() == [2, 0, 1, 1]

    def test_label_map_png(self, tmp_path):
        path = tmp_path / "labels.png"
        write_label_map(path, np.array([0, 3, 7, 1, 1, 0]), 3, 2)
        assert read_segment_map(path).tolist() == [[0, 3, 7], [1, 1, 0]]

    def test_label_map_size(self, tmp_path):
        with pytest.raises(ShapeMismatchError):
            write_label_map(tmp_path / "labels.png", np.zeros(5, dtype=int), 2, 2)

    def test_raster_label_range(self, tmp_path):
        with pytest.raises(FormatError):
            write_label_map(tmp_path / "labels.png", np.array([0, 300]), 2, 1)

    def test_plain_pgm_layout(self, tmp_path):
        path = tmp_path / "out.pgm"
        write_pnm_ascii(path, np.array([[0, 255], [10, 20]]))
        assert path.read_text(encoding="ascii") == "P2\n2 2\n255\n0 255\n10 20\n"
