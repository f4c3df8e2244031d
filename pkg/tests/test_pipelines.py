"""Tests for the image, mesh, CRF and superpixel pipelines."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from permutofilt.config import CrfConfig, FeatureKind, KernelConfig, TrainingConfig
from permutofilt.crf.kernels import LatticeKernel
from permutofilt.crf.meanfield import mf_run, potts
from permutofilt.errors import (
    EmptyDatasetError,
    ParameterError,
    RecipeMismatchError,
    ShapeMismatchError,
)
from permutofilt.ops.filter_bank import gaussian_init
from permutofilt.pipelines import (
    CrfParams,
    CrfProblem,
    EvaluationRow,
    FeatureRecipe,
    ImageBuffer,
    bi_filter,
    bicubic_upsample,
    crf_refine,
    crf_train,
    denoise_apply,
    denoise_train,
    downsample,
    load_image,
    make_features,
    mesh_denoise,
    psnr,
    rmse,
    save_image,
    upsample_guided,
    write_csv,
)
from permutofilt.pipelines.denoise import default_recipe
from permutofilt.pipelines.reporting import format_summary, method_means
from permutofilt.pipelines.segmentation import accuracy, run_problem
from permutofilt.pipelines.synthetic import (
    clustered_crf_instance,
    denoising_pairs,
    displacement_sample,
)
from permutofilt.pipelines.upsample import default_recipe as upsample_recipe


class TestImages:
    """Tests for image buffers, features and metrics."""

    def test_load_png(self, gray_png):
        img = load_image(gray_png)
        assert (img.width, img.height, img.channels) == (16, 16, 1)
        assert img.pixels[0, 0, 0] == pytest.approx(50 / 255)

    def test_save_plain_pgm_then_load(self, tmp_path, gray_png):
        img = load_image(gray_png)
        path = tmp_path / "copy.pgm"
        save_image(path, img)
        assert path.read_text(encoding="ascii").startswith("P2\n16 16\n255\n")
        assert_allclose(load_image(path).pixels, img.pixels)

    def test_position_intensity_features(self):
        img = ImageBuffer(np.array([[0.0, 1.0], [0.2, 0.4]]))
        recipe = FeatureRecipe(kind="xyv", scales=[0.5, 0.1])
        features = make_features(img, recipe)
        assert features.shape == (4, 3)
        assert_allclose(features[1], [0.5, 0.0, 25.5])
        assert_allclose(features[2], [0.0, 0.5, 5.1])

    def test_color_features_need_rgb(self, gray_png):
        with pytest.raises(RecipeMismatchError):
            make_features(load_image(gray_png), FeatureRecipe(kind="xyrgb", scales=[1.0]))

    def test_recipe_rejects_bad_scales(self):
        with pytest.raises(ValueError):
            FeatureRecipe(kind="xy", scales=[0.0])

    def test_psnr(self):
        a = np.zeros((4, 4))
        assert psnr(a, a) == 99.0
        assert psnr(a, np.full((4, 4), 0.1)) == pytest.approx(20.0)

    def test_psnr_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            psnr(np.zeros(3), np.zeros(4))

    def test_rmse(self):
        assert rmse(np.zeros(4), np.full(4, 2.0)) == pytest.approx(2.0)


class TestUpsampling:
    """Tests for downsampling, bicubic and guided upsampling."""

    def test_downsample_takes_block_means(self):
        img = ImageBuffer(np.arange(16.0).reshape(4, 4) / 16.0)
        low = downsample(img, 2)
        assert_allclose(low.pixels[:, :, 0], np.array([[2.5, 4.5], [10.5, 12.5]]) / 16.0)

    def test_bicubic_keeps_constants(self):
        out = bicubic_upsample(ImageBuffer(np.full((3, 5), 0.4)), 4)
        assert (out.width, out.height) == (20, 12)
        assert_allclose(out.pixels, 0.4)

    def test_guided_upsampling_keeps_the_edge(self, gray_png):
        truth = load_image(gray_png)
        low = downsample(truth, 2)
        guided = upsample_guided(low, truth, 2, gaussian_init(3, 2, 1.0), upsample_recipe(2))
        bicubic = bicubic_upsample(low, 2)
        assert psnr(guided, truth) > psnr(bicubic, truth)
        assert psnr(guided, truth) > 40.0

    def test_guidance_size_must_match(self, gray_png):
        truth = load_image(gray_png)
        low = downsample(truth, 4)
        with pytest.raises(ShapeMismatchError):
            upsample_guided(low, truth, 2, gaussian_init(3, 2, 1.0), upsample_recipe(2))

    def test_factor_must_be_positive(self):
        img = ImageBuffer(np.full((4, 4), 0.5))
        with pytest.raises(ParameterError):
            upsample_recipe(0)
        with pytest.raises(ParameterError):
            bicubic_upsample(img, 0)
        with pytest.raises(ParameterError):
            downsample(img, -2)


class TestDenoising:
    """Tests for bilateral denoising and filter learning."""

    def test_gaussian_filter_improves_psnr(self):
        noisy, clean = denoising_pairs(seed=0, count=1, size=32)[0]
        out = denoise_apply(noisy, gaussian_init(3, 2, 1.0), default_recipe())
        assert psnr(out, clean) > psnr(noisy, clean) + 1.0

    def test_training_is_deterministic(self):
        pairs = denoising_pairs(seed=3, count=2, size=12)
        config = TrainingConfig(epochs=2, lr=0.02, seed=5)
        a = denoise_train(pairs, default_recipe(), 1, config)
        b = denoise_train(pairs, default_recipe(), 1, config)
        assert np.array_equal(a.weights, b.weights)
        assert a.t == 15

    def test_training_needs_pairs(self):
        with pytest.raises(EmptyDatasetError):
            denoise_train([], default_recipe(), 1, TrainingConfig())


class TestMesh:
    """Tests for displacement denoising over embedding features."""

    def test_filtering_reduces_the_error(self, rng):
        sample = displacement_sample(rng, n=800, noise=0.5)
        out = mesh_denoise(sample.noisy, gaussian_init(4, 2, 1.0), scales=3.0)
        assert out.shape == (800, 3)
        assert rmse(out, sample.clean) < rmse(sample.noisy.values, sample.clean)


class TestSegmentation:
    """Tests for CRF refinement and training."""

    @staticmethod
    def xy_config(steps=5):
        kernel = KernelConfig(features=FeatureKind.POSITION, scales=[1.0], weight=5.0, s=1)
        return CrfConfig(steps=steps, kernels=[kernel])

    def test_refinement_fixes_flipped_pixels(self, rgb_png):
        img = load_image(rgb_png)
        truth = (np.arange(64) % 8 >= 4).astype(np.int64)
        unaries = np.zeros((64, 2))
        unaries[np.arange(64), 1 - truth] = 0.5
        for pixel in (3, 17, 30, 36, 50, 61):
            unaries[pixel] = unaries[pixel, ::-1]
        before = float(np.mean(np.argmin(unaries, axis=1) == truth))
        state = crf_refine(unaries, img, CrfConfig())
        assert_allclose(state.q.sum(axis=1), 1.0, atol=1e-12)
        assert accuracy(state, truth) > before

    def test_unaries_must_cover_the_image(self, rgb_png):
        with pytest.raises(ShapeMismatchError):
            crf_refine(np.zeros((10, 2)), load_image(rgb_png), CrfConfig())

    def test_clustered_points(self, rng):
        instance = clustered_crf_instance(rng)
        problem = CrfProblem.build(
            instance.unaries, {FeatureKind.POSITION: instance.features}, self.xy_config()
        )
        before = float(np.mean(np.argmin(instance.unaries, axis=1) == instance.labels))
        state = run_problem(problem, CrfParams.initial(self.xy_config(), 3), self.xy_config())
        assert accuracy(state, instance.labels) > before

    def test_problem_matches_a_direct_kernel(self, rng):
        instance = clustered_crf_instance(rng, n=60)
        config = self.xy_config(steps=3)
        features = {FeatureKind.POSITION: instance.features}
        problem = CrfProblem.build(instance.unaries, features, config)
        kernel = LatticeKernel.from_features(instance.features, 1.0, gaussian_init(2, 1, 1.0), 5.0)
        direct = mf_run(instance.unaries, [kernel], compat=potts(3), steps=3)
        assert_allclose(run_problem(problem, CrfParams.initial(config, 3), config).q, direct.q)

    def test_training_records_history(self, rng):
        instance = clustered_crf_instance(rng, n=80)
        config = self.xy_config(steps=2)
        problem = CrfProblem.build(
            instance.unaries,
            {FeatureKind.POSITION: instance.features},
            config,
            labels=instance.labels,
        )
        training = TrainingConfig(epochs=2, lr=0.01, loss="logistic")
        result = crf_train([problem], config, training)
        assert len(result.history) == 3
        assert all(np.isfinite(result.history))
        assert result.params.banks[0][0].t == 7

    def test_training_needs_labels(self, rng):
        instance = clustered_crf_instance(rng, n=20)
        config = self.xy_config()
        features = {FeatureKind.POSITION: instance.features}
        problem = CrfProblem.build(instance.unaries, features, config)
        with pytest.raises(EmptyDatasetError):
            crf_train([problem], config, TrainingConfig())

    def test_missing_feature_kind(self, rng):
        with pytest.raises(ShapeMismatchError):
            features = {FeatureKind.POSITION_COLOR: np.zeros((5, 5))}
            CrfProblem.build(np.zeros((5, 2)), features, self.xy_config())


class TestSuperpixelFilter:
    """Tests for segment-to-pixel filtering."""

    def test_flat_segments_are_reproduced(self, gray_png):
        img = load_image(gray_png)
        ys, xs = np.mgrid[0:16, 0:16]
        segments = (ys // 8) * 2 + xs // 8
        recipe = FeatureRecipe(kind="xyv", scales=[0.05, 0.1])
        out = bi_filter(img, segments, recipe)
        assert_allclose(out.pixels, img.pixels, atol=0.01)

    def test_segment_map_must_cover_the_image(self, gray_png):
        img = load_image(gray_png)
        with pytest.raises(ShapeMismatchError):
            bi_filter(img, np.zeros((4, 4), dtype=np.int64), FeatureRecipe(kind="xy", scales=[0.1]))


class TestReporting:
    """Tests for evaluation rows."""

    def test_csv_and_summary(self, tmp_path):
        rows = [
            EvaluationRow(method="Noisy", sample="a", value=20.0),
            EvaluationRow(method="Learned", sample="a", value=30.0),
            EvaluationRow(method="Noisy", sample="b", value=22.0),
        ]
        path = tmp_path / "report.csv"
        write_csv(path, rows)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "method,image,psnr"
        assert lines[1] == "Noisy,a,20.000000"
        assert method_means(rows) == {"Noisy": 21.0, "Learned": 30.0}
        assert format_summary(rows).splitlines()[0].startswith("Noisy")
