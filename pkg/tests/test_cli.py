"""Tests for the command-line interface."""

import numpy as np
import pytest

from permutofilt.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, parse_layered, run
from permutofilt.errors import ConfigError
from permutofilt.io import read_point_cloud, read_segment_map, write_point_cloud, write_unaries
from permutofilt.pipelines.images import load_image, save_image
from permutofilt.pipelines.synthetic import displacement_sample
from permutofilt.pipelines.upsample import downsample


class TestChecks:
    """Tests for the oracle and gradient check commands."""

    def test_oracle_diff(self, capsys):
        assert run(["oracle-diff", "--n", "25", "--d", "3", "--c", "2", "--chunk", "3"]) == EXIT_OK
        line = capsys.readouterr().out.strip()
        assert line.startswith("max_rel_err=")
        assert float(line.split()[0].split("=")[1]) < 1e-10

    @pytest.mark.parametrize("target", ["input", "filter", "normalized", "crf", "inception"])
    def test_gradcheck(self, capsys, target):
        assert run(["gradcheck", "--target", target, "--cases", "2"]) == EXIT_OK
        assert capsys.readouterr().out.startswith(f"{target}: max_rel_err=")

    def test_bench(self, capsys):
        assert run(["bench", "--n", "200", "--d", "2", "--c", "1", "--repeat", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "forward" in out
        assert "grad_filter" in out


class TestExitCodes:
    """Tests for usage and data errors."""

    def test_version(self):
        assert run(["--version"]) == EXIT_OK

    def test_unknown_command(self):
        assert run(["sharpen"]) == EXIT_USAGE

    def test_missing_input(self, tmp_path, capsys):
        code = run(["filter", "--out", str(tmp_path / "o.png"), "--gauss", "--scales", "1"])
        assert code == EXIT_USAGE
        assert "--in" in capsys.readouterr().err

    def test_gauss_and_filter_conflict(self, tmp_path, rgb_png):
        argv = ["filter", "--in", str(rgb_png), "--out", str(tmp_path / "o.png"), "--scales", "1"]
        assert run(argv) == EXIT_USAGE

    def test_missing_file(self, tmp_path, capsys):
        argv = ["filter", "--in", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o.png")]
        assert run([*argv, "--gauss", "--scales", "1"]) == EXIT_DATA
        assert capsys.readouterr().err.startswith("error: ")

    def test_bad_filter_file(self, tmp_path, rgb_png):
        bad = tmp_path / "bad.pbf"
        bad.write_bytes(b"nonsense")
        argv = ["filter", "--in", str(rgb_png), "--out", str(tmp_path / "o.png")]
        assert run([*argv, "--filter", str(bad), "--scales", "1"]) == EXIT_DATA

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour=red\n", encoding="utf-8")
        assert run(["oracle-diff", "--config", str(cfg)]) == EXIT_DATA

    @pytest.mark.parametrize("option", [["--sigma", "0"], ["--s", "-1"]])
    def test_out_of_range_filter_parameter(self, tmp_path, rgb_png, capsys, option):
        argv = ["filter", "--in", str(rgb_png), "--out", str(tmp_path / "o.png")]
        assert run([*argv, "--gauss", "--scales", "1", *option]) == EXIT_DATA
        assert capsys.readouterr().err.startswith("error: ")

    def test_zero_upsampling_factor(self, tmp_path, gray_png):
        argv = ["upsample", "--low", str(gray_png), "--guidance", str(gray_png), "--factor", "0"]
        assert run([*argv, "--out", str(tmp_path / "up.png")]) == EXIT_DATA

    @pytest.mark.parametrize("thetas", ["1,-0.5", "0"])
    def test_non_positive_thetas(self, tmp_path, gray_png, thetas):
        segments = tmp_path / "seg.csv"
        segments.write_text("segment\n" + "0\n" * 256, encoding="utf-8")
        argv = ["bi-filter", "--in", str(gray_png), "--segments", str(segments)]
        argv += ["--thetas", thetas, "--out", str(tmp_path / "bi.png")]
        assert run(argv) == EXIT_DATA

    def test_every_option_has_help(self):
        _, subs = build_parser()
        for name, sub in subs.items():
            for dest, action in sub.options.items():
                assert action.help, f"{name} --{dest}"


class TestLayeredOptions:
    """Tests for defaults, config file, environment and flag precedence."""

    def test_default(self):
        assert parse_layered(["filter"], environ={}).sigma == 1.0

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("sigma = 1.5\nscales = 0.2,0.1\n", encoding="utf-8")
        args = parse_layered(["filter", "--config", str(cfg)], environ={})
        assert args.sigma == 1.5
        assert args.scales == [0.2, 0.1]

    def test_environment_beats_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("sigma=1.5\n", encoding="utf-8")
        env = {"PERMUTOFILT_SIGMA": "2.5"}
        assert parse_layered(["filter", "--config", str(cfg)], environ=env).sigma == 2.5

    def test_flag_beats_environment(self):
        env = {"PERMUTOFILT_SIGMA": "2.5"}
        assert parse_layered(["filter", "--sigma", "3"], environ=env).sigma == 3.0

    def test_config_path_from_environment(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("s=2\n", encoding="utf-8")
        args = parse_layered(["filter"], environ={"PERMUTOFILT_CONFIG": str(cfg)})
        assert args.s == 2

    def test_boolean_from_environment(self):
        args = parse_layered(["filter"], environ={"PERMUTOFILT_GAUSS": "yes"})
        assert args.gauss is True

    def test_bad_boolean(self):
        with pytest.raises(ConfigError):
            parse_layered(["filter"], environ={"PERMUTOFILT_RAW": "maybe"})

    def test_kernel_keys_are_kept(self, tmp_path):
        cfg = tmp_path / "crf.cfg"
        cfg.write_text("steps=3\nkernel.0.features=xy\n", encoding="utf-8")
        args = parse_layered(["crf", "--config", str(cfg)], environ={})
        assert args.steps == 3
        assert args.config_values == {"kernel.0.features": "xy"}

    def test_training_keys_in_config(self, tmp_path):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("lr=0.01\nweight_decay=0\nfeature_scales=0.5, 0.025\n", encoding="utf-8")
        args = parse_layered(["denoise-train", "--config", str(cfg)], environ={})
        assert args.lr == 0.01
        assert args.weight_decay == 0.0
        assert args.scales == [0.5, 0.025]

    def test_scales_flag_beats_feature_scales(self, tmp_path):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("feature_scales=0.5,0.025\n", encoding="utf-8")
        argv = ["denoise-train", "--config", str(cfg)]
        env = {"PERMUTOFILT_SCALES": "0.3"}
        assert parse_layered(argv, environ=env).scales == [0.3]
        assert parse_layered([*argv, "--scales", "0.2,0.1"], environ=env).scales == [0.2, 0.1]

    def test_feature_scales_needs_a_training_command(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("feature_scales=0.5\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            parse_layered(["filter", "--config", str(cfg)], environ={})


class TestCommands:
    """End-to-end runs of the pipeline commands."""

    def test_filter(self, tmp_path, rgb_png):
        out = tmp_path / "filtered.png"
        argv = ["filter", "--in", str(rgb_png), "--out", str(out), "--gauss"]
        assert run([*argv, "--scales", "0.2,0.05"]) == EXIT_OK
        img = load_image(out)
        assert (img.width, img.height, img.channels) == (8, 8, 3)

    def test_denoise_train_is_deterministic(self, tmp_path):
        outputs = []
        for name in ("a.pbf", "b.pbf"):
            out = tmp_path / name
            argv = ["denoise-train", "--synthetic", "2", "--epochs", "1", "--s", "1"]
            assert run([*argv, "--seed", "4", "--out", str(out)]) == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_denoise_train_from_config(self, tmp_path):
        cfg = tmp_path / "train.cfg"
        lines = ["lr=0.01", "momentum=0.5", "weight_decay=0", "epochs=1", "batch=2", "loss=mse"]
        lines += ["seed=3", "feature_scales=0.4,0.05"]
        cfg.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "f.pbf"
        argv = ["denoise-train", "--synthetic", "2", "--s", "1", "--config", str(cfg)]
        assert run([*argv, "--out", str(out)]) == EXIT_OK
        assert out.stat().st_size > 0

    def test_denoise_apply_with_trained_filter(self, tmp_path, gray_png):
        bank = tmp_path / "f.pbf"
        argv = ["denoise-train", "--synthetic", "1", "--epochs", "1", "--s", "1"]
        assert run([*argv, "--out", str(bank)]) == EXIT_OK
        out = tmp_path / "clean.png"
        argv = ["denoise-apply", "--in", str(gray_png), "--filter", str(bank), "--out", str(out)]
        assert run(argv) == EXIT_OK
        assert load_image(out).width == 16

    def test_upsample_report(self, tmp_path, gray_png, capsys):
        low = tmp_path / "low.png"
        save_image(low, downsample(load_image(gray_png), 2))
        report = tmp_path / "report.csv"
        argv = ["upsample", "--low", str(low), "--guidance", str(gray_png), "--factor", "2"]
        argv += ["--reference", str(gray_png), "--report", str(report)]
        assert run([*argv, "--out", str(tmp_path / "up.png")]) == EXIT_OK
        lines = report.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "method,image,psnr"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["Bicubic", "Gauss"]
        assert "Bicubic" in capsys.readouterr().out

    def test_mesh_denoise(self, tmp_path, rng):
        sample = displacement_sample(rng, n=300)
        noisy, clean = tmp_path / "noisy.csv", tmp_path / "clean.csv"
        write_point_cloud(noisy, sample.noisy.values, sample.noisy.features)
        write_point_cloud(clean, sample.clean, sample.noisy.features)
        out = tmp_path / "out.csv"
        argv = ["mesh-denoise", "--in", str(noisy), "--clean", str(clean), "--scales", "3"]
        assert run([*argv, "--out", str(out)]) == EXIT_OK
        assert read_point_cloud(out).values.shape == (300, 3)

    def test_crf(self, tmp_path, rgb_png):
        unaries = np.zeros((64, 2))
        unaries[np.arange(64) % 8 >= 4, 0] = 1.0
        unaries[np.arange(64) % 8 < 4, 1] = 1.0
        path = tmp_path / "u.bin"
        write_unaries(path, unaries)
        cfg = tmp_path / "crf.cfg"
        cfg.write_text("kernel.0.features=xy\nkernel.0.scales=0.3\nkernel.0.weight=1\n", "utf-8")
        out = tmp_path / "labels.csv"
        argv = ["crf", "--unaries", str(path), "--image", str(rgb_png), "--config", str(cfg)]
        assert run([*argv, "--steps", "3", "--out", str(out)]) == EXIT_OK
        assert read_segment_map(out).tolist() == [int(i % 8 >= 4) for i in range(64)]

    def test_crf_unaries_must_match_the_image(self, tmp_path, rgb_png):
        path = tmp_path / "u.bin"
        write_unaries(path, np.zeros((10, 2)))
        argv = ["crf", "--unaries", str(path), "--image", str(rgb_png)]
        assert run([*argv, "--out", str(tmp_path / "l.png")]) == EXIT_DATA

    def test_bi_filter(self, tmp_path, gray_png):
        segments = tmp_path / "seg.csv"
        ids = [(i // 16 // 8) * 2 + (i % 16) // 8 for i in range(256)]
        segments.write_text("segment\n" + "\n".join(map(str, ids)) + "\n", encoding="utf-8")
        out = tmp_path / "bi.png"
        argv = ["bi-filter", "--in", str(gray_png), "--segments", str(segments), "--out", str(out)]
        assert run(argv) == EXIT_OK
        assert load_image(out).height == 16
