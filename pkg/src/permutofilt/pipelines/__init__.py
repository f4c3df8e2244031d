"""End-to-end flows built on the lattice filters."""

from permutofilt.pipelines.denoise import denoise_apply, denoise_report, denoise_train
from permutofilt.pipelines.fitting import FilterSample, FitResult, fit_filter
from permutofilt.pipelines.images import (
    FeatureRecipe,
    ImageBuffer,
    load_image,
    make_features,
    psnr,
    rmse,
    save_image,
)
from permutofilt.pipelines.mesh import mesh_denoise, mesh_report, mesh_train
from permutofilt.pipelines.reporting import EvaluationRow, write_csv
from permutofilt.pipelines.segmentation import CrfParams, CrfProblem, crf_refine, crf_train
from permutofilt.pipelines.superpixel_filter import bi_filter
from permutofilt.pipelines.upsample import (
    bicubic_upsample,
    downsample,
    upsample_guided,
    upsample_report,
    upsample_train,
)

__all__ = [
    "CrfParams",
    "CrfProblem",
    "EvaluationRow",
    "FeatureRecipe",
    "FilterSample",
    "FitResult",
    "ImageBuffer",
    "bi_filter",
    "bicubic_upsample",
    "crf_refine",
    "crf_train",
    "denoise_apply",
    "denoise_report",
    "denoise_train",
    "downsample",
    "fit_filter",
    "load_image",
    "make_features",
    "mesh_denoise",
    "mesh_report",
    "mesh_train",
    "psnr",
    "rmse",
    "save_image",
    "upsample_guided",
    "upsample_report",
    "upsample_train",
    "write_csv",
]
