"""Command-line interface: one subcommand per pipeline plus oracle, gradient and timing checks.

Option values come from, in increasing precedence: built-in defaults, the ``--config`` key=value
file, ``PERMUTOFILT_<OPTION>`` environment variables, explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Callable, Sequence
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from permutofilt import __version__
from permutofilt.config import (
    ENV_PREFIX,
    TRAINING_KEYS,
    FeatureKind,
    TrainingConfig,
    check_keys,
    crf_config,
    env_overrides,
    load_key_values,
)
from permutofilt.errors import ConfigError, PermutoError, ShapeMismatchError
from permutofilt.inception.gram import DEFAULT_THETAS
from permutofilt.io import (
    read_point_cloud,
    read_segment_map,
    read_unaries,
    write_label_map,
    write_point_cloud,
)
from permutofilt.lattice.core import filter_size
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import (
    apply_dense,
    build_operators,
    dense_operator,
    forward,
    grad_filter,
    grad_input,
)
from permutofilt.pipelines import denoise, mesh, upsample
from permutofilt.pipelines.images import FeatureRecipe, load_image, psnr, save_image
from permutofilt.pipelines.reporting import EvaluationRow, format_summary, write_csv
from permutofilt.pipelines.segmentation import (
    CrfProblem,
    accuracy,
    crf_refine,
    crf_train,
    image_feature_sets,
    run_problem,
)
from permutofilt.pipelines.superpixel_filter import bi_filter
from permutofilt.pipelines.synthetic import denoising_pairs
from permutofilt.training.blocks import GradTarget, make_block
from permutofilt.training.gradcheck import GradCheckReport, grad_check
from permutofilt.training.losses import LossKind

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DATA = 3

ORACLE_TOLERANCE = 1e-10
GRADCHECK_TOLERANCE = 1e-5

_TRUE = frozenset({"1", "true", "yes", "on"})
_FALSE = frozenset({"0", "false", "no", "off"})


class Command(str, Enum):
    FILTER = "filter"
    UPSAMPLE = "upsample"
    DENOISE_TRAIN = "denoise-train"
    DENOISE_APPLY = "denoise-apply"
    MESH_DENOISE = "mesh-denoise"
    CRF = "crf"
    BI_FILTER = "bi-filter"
    GRADCHECK = "gradcheck"
    BENCH = "bench"
    ORACLE_DIFF = "oracle-diff"


class UsageError(Exception):
    """Missing or conflicting options."""


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers like 0.1,0.5, got {text!r}") from None


class LayeredParser(argparse.ArgumentParser):
    """Argument parser that keeps its options by destination for config and environment layering."""

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        self.options: dict[str, argparse.Action] = {}
        super().__init__(*args, **kwargs)

    def add_argument(self, *args: Any, **kwargs: Any) -> argparse.Action:
        action = super().add_argument(*args, **kwargs)
        if action.option_strings and action.dest not in (argparse.SUPPRESS, "help"):
            self.options[action.dest] = action
        return action


def _add_common_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="Seed for all randomness")
    p.add_argument("--threads", type=int, default=1, help="Worker threads for filtering")
    p.add_argument("--config", type=Path, help="key=value file with option defaults")
    p.add_argument("--out", type=Path, help="Output path")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def _add_filter_options(
    p: argparse.ArgumentParser, features: str, scales: list[float] | None, s: int
) -> None:
    p.add_argument(
        "--features",
        default=features,
        help="Feature space: xy, xyv (position+intensity) or xyrgb (position+color)",
    )
    p.add_argument(
        "--scales",
        type=_float_list,
        default=scales,
        help="Feature scales: one, one per group (position, photometric) or one per dim",
    )
    p.add_argument("--s", type=int, default=s, help="Filter neighborhood in lattice hops")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian filter width in hops")
    p.add_argument("--filter", type=Path, help="PBF1 file with filter taps")


def _add_training_options(p: argparse.ArgumentParser, loss: LossKind = LossKind.MSE) -> None:
    p.add_argument("--lr", type=float, help="Learning rate")
    p.add_argument("--momentum", type=float, help="SGD momentum")
    p.add_argument("--weight-decay", type=float, help="Weight decay on filter taps")
    p.add_argument("--epochs", type=int, help="Training epochs")
    p.add_argument("--batch", type=int, help="Samples per update")
    p.add_argument(
        "--loss", default=loss.value, choices=[k.value for k in LossKind], help="Training loss"
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, LayeredParser]]:
    """The top-level parser and the parser of every subcommand."""
    parser = argparse.ArgumentParser(
        prog="permutofilt",
        description="Learnable permutohedral lattice filtering",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(
        dest="command", required=True, metavar="COMMAND", parser_class=LayeredParser
    )
    subs: dict[str, LayeredParser] = {}

    def add(command: Command, help_text: str) -> LayeredParser:
        p = sub.add_parser(command.value, help=help_text, description=help_text)
        assert isinstance(p, LayeredParser)
        _add_common_options(p)
        subs[command.value] = p
        return p

    p = add(Command.FILTER, "Filter an image over its own pixel features")
    p.add_argument("--in", dest="input", type=Path, help="Input image")
    _add_filter_options(p, "xyrgb", None, 1)
    p.add_argument("--gauss", action="store_true", help="Use a Gaussian filter of width --sigma")
    p.add_argument("--raw", action="store_true", help="Skip normalization by the filtered ones")

    p = add(Command.UPSAMPLE, "Joint bilateral upsampling guided by a high-resolution image")
    p.add_argument("--low", type=Path, help="Low-resolution image")
    p.add_argument("--guidance", type=Path, help="High-resolution guidance image")
    p.add_argument("--factor", type=int, default=4, help="Upsampling factor")
    _add_filter_options(p, "xyv", None, 2)
    p.add_argument("--reference", type=Path, help="Ground-truth image for PSNR against bicubic")
    p.add_argument("--report", type=Path, help="CSV of per-method PSNR (needs --reference)")

    p = add(Command.DENOISE_TRAIN, "Learn a denoising filter from (noisy, clean) pairs")
    p.add_argument("--noisy", type=Path, nargs="+", help="Noisy training images")
    p.add_argument("--clean", type=Path, nargs="+", help="Clean training images")
    p.add_argument("--synthetic", type=int, help="Train on N seeded synthetic pairs instead")
    p.add_argument("--test-noisy", type=Path, nargs="+", help="Noisy held-out images")
    p.add_argument("--test-clean", type=Path, nargs="+", help="Clean held-out images")
    p.add_argument("--report", type=Path, help="CSV of held-out PSNR per method")
    _add_filter_options(p, "xyv", None, 2)
    _add_training_options(p)

    p = add(Command.DENOISE_APPLY, "Denoise an image with a learned filter")
    p.add_argument("--in", dest="input", type=Path, help="Noisy image")
    _add_filter_options(p, "xyv", None, 2)

    p = add(Command.MESH_DENOISE, "Filter per-vertex displacements over embedding features")
    p.add_argument("--in", dest="input", type=Path, help="CSV with value_* and feat_* columns")
    p.add_argument("--clean", type=Path, help="CSV with the clean displacements, for RMSE")
    p.add_argument("--report", type=Path, help="CSV of RMSE for Noisy and the filter")
    p.add_argument(
        "--scales", type=_float_list, default=[mesh.DEFAULT_SCALE], help="Feature scales"
    )
    p.add_argument("--s", type=int, default=2, help="Filter neighborhood in lattice hops")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian filter width in hops")
    p.add_argument("--filter", type=Path, help="PBF1 file with filter taps")

    p = add(Command.CRF, "Dense CRF mean-field refinement of per-pixel unaries")
    p.add_argument("--unaries", type=Path, help="Unaries file (u32 n, u32 L, f32 values)")
    p.add_argument("--image", type=Path, help="Image providing the pairwise features")
    p.add_argument("--steps", type=int, help="Mean-field iterations")
    toggle = argparse.BooleanOptionalAction
    p.add_argument("--loose", action=toggle, help="Separate kernels per step")
    p.add_argument("--exclude-self", action=toggle, help="Drop self terms from messages")
    p.add_argument("--normalize", action=toggle, help="Normalize filter responses")
    p.add_argument("--train-labels", type=Path, help="Label map to learn the pairwise filters on")
    p.add_argument("--class-weights", type=_float_list, help="Per-class weights for the loss")
    _add_training_options(p, LossKind.LOGISTIC)

    p = add(Command.BI_FILTER, "Superpixel-to-pixel bilateral inception filtering")
    p.add_argument("--in", dest="input", type=Path, help="Input image")
    p.add_argument("--segments", type=Path, help="Segment map (integer raster or CSV)")
    p.add_argument("--features", default="xyv", help="Feature space: xy, xyv or xyrgb")
    p.add_argument("--scales", type=_float_list, default=[0.05, 0.1], help="Feature scales")
    p.add_argument("--thetas", type=_float_list, default=list(DEFAULT_THETAS), help="Kernel scales")

    p = add(Command.GRADCHECK, "Finite-difference check of analytic gradients")
    p.add_argument(
        "--target",
        default="filter",
        choices=[t.value for t in GradTarget],
        help="Block whose gradients are checked",
    )
    p.add_argument("--d", type=int, default=2, help="Feature dimension")
    p.add_argument("--s", type=int, default=1, help="Filter neighborhood in lattice hops")
    p.add_argument("--n", type=int, default=12, help="Points per case")
    p.add_argument("--cases", type=int, default=1, help="Random cases to check")
    p.add_argument("--probes", type=int, default=20, help="Probed coordinates per tensor")

    p = add(Command.BENCH, "Per-stage wall time of building, filtering and backpropagation")
    p.add_argument("--n", type=int, default=10000, help="Points")
    p.add_argument("--d", type=int, default=3, help="Feature dimension")
    p.add_argument("--s", type=int, default=1, help="Filter neighborhood in lattice hops")
    p.add_argument("--c", type=int, default=3, help="Channels")
    p.add_argument("--repeat", type=int, default=5, help="Timed runs")

    p = add(Command.ORACLE_DIFF, "Compare the lattice filter with its materialized dense operator")
    p.add_argument("--n", type=int, default=30, help="Points")
    p.add_argument("--d", type=int, default=2, help="Feature dimension")
    p.add_argument("--s", type=int, default=1, help="Filter neighborhood in lattice hops")
    p.add_argument("--c", type=int, default=2, help="Channels")
    p.add_argument("--chunk", type=int, default=4096, help="Vertices per convolution chunk")
    return parser, subs


def _layered_value(action: argparse.Action, raw: str) -> Any:
    """Convert a config or environment string the way the option would parse it."""
    if action.nargs == 0:
        flag = raw.strip().lower()
        if flag in _TRUE:
            return True
        if flag in _FALSE:
            return False
        raise ConfigError(f"{action.dest}: expected a boolean, got {raw!r}")
    if action.nargs in ("+", "*"):
        convert: Callable[[str], Any] = action.type if callable(action.type) else str
        return [convert(v.strip()) for v in raw.split(",") if v.strip()]
    # argparse applies the option type to string defaults
    return raw


def parse_layered(
    argv: Sequence[str], environ: dict[str, str] | None = None
) -> argparse.Namespace:
    """Parse ``argv`` with config-file and environment values installed as defaults.

    Config keys that name no option of the subcommand are kept on ``config_values``. Training
    subcommands also accept every training key; ``feature_scales`` stands in for ``scales``.
    """
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    sub = subs[args.command]
    actions = sub.options
    env = env_overrides(sorted(actions), environ)
    config_path = args.config if args.config is not None else env.get("config")
    values = load_key_values(config_path) if config_path is not None else {}
    allowed: frozenset[str] = frozenset()
    if "lr" in actions:
        allowed = TRAINING_KEYS if "scales" in actions else TRAINING_KEYS - {"feature_scales"}
    layered = {k: v for k, v in values.items() if k in actions}
    if "feature_scales" in values and "scales" in actions:
        layered.setdefault("scales", values["feature_scales"])
    layered.update({k: v for k, v in env.items() if k != "config"})
    if layered:
        sub.set_defaults(**{k: _layered_value(actions[k], v) for k, v in layered.items()})
        args = parser.parse_args(argv)
    args.config_values = {k: v for k, v in values.items() if k not in actions}
    check_keys(args.config_values, allowed)
    return args


def _require(args: argparse.Namespace, *dests: str) -> None:
    missing = [d for d in dests if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + ("in" if d == "input" else d.replace("_", "-")) for d in missing)
        raise UsageError(f"{args.command}: missing {flags} (or {ENV_PREFIX}<OPTION>)")


def _recipe(args: argparse.Namespace, default: FeatureRecipe) -> FeatureRecipe:
    kind = FeatureKind.parse(args.features)
    if args.scales is None:
        if kind is not default.kind:
            raise UsageError(f"--scales is required for {kind.value} features")
        return default
    return FeatureRecipe(kind=kind, scales=args.scales)


def _bank(args: argparse.Namespace, d: int) -> FilterBank:
    if args.filter is None:
        return gaussian_init(d, args.s, args.sigma)
    bank = FilterBank.load(args.filter)
    if bank.d != d:
        raise ShapeMismatchError(f"{args.filter}: filter is {bank.d}-D, features are {d}-D")
    return bank


def _training(args: argparse.Namespace) -> TrainingConfig:
    data: dict[str, Any] = {"seed": args.seed, "loss": args.loss}
    for key in ("lr", "momentum", "weight_decay", "epochs", "batch", "class_weights"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return TrainingConfig.model_validate(data)


def _cmd_filter(args: argparse.Namespace) -> int:
    _require(args, "input", "out")
    if args.gauss == (args.filter is not None):
        raise UsageError("filter: give exactly one of --gauss and --filter")
    if args.scales is None:
        raise UsageError("filter: --scales is required")
    img = load_image(args.input)
    recipe = FeatureRecipe(kind=FeatureKind.parse(args.features), scales=args.scales)
    bank = _bank(args, recipe.dim)
    out = denoise.denoise_apply(img, bank, recipe, normalize=not args.raw, threads=args.threads)
    save_image(args.out, out)
    return EXIT_OK


def _cmd_upsample(args: argparse.Namespace) -> int:
    _require(args, "low", "guidance", "out")
    if args.report is not None and args.reference is None:
        raise UsageError("upsample: --report needs --reference")
    low = load_image(args.low)
    guidance = load_image(args.guidance)
    recipe = _recipe(args, upsample.default_recipe(args.factor))
    bank = _bank(args, recipe.dim)
    out = upsample.upsample_guided(low, guidance, args.factor, bank, recipe, threads=args.threads)
    save_image(args.out, out)
    if args.reference is not None:
        reference = load_image(args.reference)
        bicubic = upsample.bicubic_upsample(low, args.factor, guidance.width, guidance.height)
        method = "Gauss" if args.filter is None else "Learned"
        rows = [
            EvaluationRow(method="Bicubic", sample=args.low.name, value=psnr(bicubic, reference)),
            EvaluationRow(method=method, sample=args.low.name, value=psnr(out, reference)),
        ]
        print(format_summary(rows))
        if args.report is not None:
            write_csv(args.report, rows)
    return EXIT_OK


def _image_pairs(noisy: Sequence[Path], clean: Sequence[Path]) -> list[denoise.ImagePair]:
    if len(noisy) != len(clean):
        raise UsageError(f"{len(noisy)} noisy images but {len(clean)} clean ones")
    return [(load_image(n), load_image(c)) for n, c in zip(noisy, clean, strict=True)]


def _cmd_denoise_train(args: argparse.Namespace) -> int:
    _require(args, "out")
    if args.synthetic is not None:
        pairs = denoising_pairs(args.seed, args.synthetic)
    else:
        _require(args, "noisy", "clean")
        pairs = _image_pairs(args.noisy, args.clean)
    recipe = _recipe(args, denoise.default_recipe())
    training = _training(args)
    if args.report is None:
        bank = denoise.denoise_train(
            pairs, recipe, args.s, training, sigma=args.sigma, threads=args.threads
        )
    else:
        if args.test_noisy is not None:
            _require(args, "test_clean")
            test = _image_pairs(args.test_noisy, args.test_clean)
        elif args.synthetic is not None:
            test = denoising_pairs(args.seed + 1, args.synthetic)
        else:
            raise UsageError("denoise-train: --report needs --synthetic or held-out images")
        rows, bank = denoise.denoise_report(
            pairs, test, recipe, args.s, training, sigma=args.sigma, threads=args.threads
        )
        write_csv(args.report, rows)
        print(format_summary(rows))
    bank.save(args.out)
    logger.info("wrote filter d=%d s=%d to %s", bank.d, bank.s, args.out)
    return EXIT_OK


def _cmd_denoise_apply(args: argparse.Namespace) -> int:
    _require(args, "input", "filter", "out")
    img = load_image(args.input)
    recipe = _recipe(args, denoise.default_recipe())
    out = denoise.denoise_apply(img, _bank(args, recipe.dim), recipe, threads=args.threads)
    save_image(args.out, out)
    return EXIT_OK


def _cmd_mesh_denoise(args: argparse.Namespace) -> int:
    _require(args, "input", "out")
    if args.report is not None and args.clean is None:
        raise UsageError("mesh-denoise: --report needs --clean")
    noisy = read_point_cloud(args.input)
    scales = np.asarray(args.scales, dtype=np.float64)
    bank = _bank(args, noisy.features.shape[1])
    out = mesh.mesh_denoise(noisy, bank, scales, threads=args.threads)
    write_point_cloud(args.out, out, noisy.features)
    if args.clean is not None:
        clean = read_point_cloud(args.clean).values
        method = "Gauss" if args.filter is None else "Learned"
        rows = mesh.mesh_report([(noisy, clean)], scales, {method: bank}, threads=args.threads)
        print(format_summary(rows, metric="rmse"))
        if args.report is not None:
            write_csv(args.report, rows, metric="rmse", key="sample")
    return EXIT_OK


def _cmd_crf(args: argparse.Namespace) -> int:
    _require(args, "unaries", "image", "out")
    config = crf_config(args.config_values)
    flags = {k: getattr(args, k) for k in ("steps", "loose", "exclude_self", "normalize")}
    config = config.model_copy(update={k: v for k, v in flags.items() if v is not None})
    unaries = read_unaries(args.unaries)
    img = load_image(args.image)
    if args.train_labels is None:
        state = crf_refine(unaries, img, config, threads=args.threads)
    else:
        labels = read_segment_map(args.train_labels).reshape(-1)
        problem = CrfProblem.build(unaries, image_feature_sets(img, config), config, labels)
        result = crf_train([problem], config, _training(args), threads=args.threads)
        state = run_problem(problem, result.params, config, threads=args.threads)
        before = float(np.mean(np.argmin(unaries, axis=1) == labels))
        print(f"accuracy unaries={before:.4f} crf={accuracy(state, labels):.4f}")
    write_label_map(args.out, state.labels, img.width, img.height)
    return EXIT_OK


def _cmd_bi_filter(args: argparse.Namespace) -> int:
    _require(args, "input", "segments", "out")
    img = load_image(args.input)
    recipe = FeatureRecipe(kind=FeatureKind.parse(args.features), scales=args.scales)
    out = bi_filter(img, read_segment_map(args.segments), recipe, thetas=args.thetas)
    save_image(args.out, out)
    return EXIT_OK


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    target = GradTarget(args.target)
    report: GradCheckReport | None = None
    for case in range(args.cases):
        block = make_block(target, d=args.d, s=args.s, n=args.n, seed=args.seed + case)
        result = grad_check(
            block,
            probes=args.probes,
            seed=args.seed + case,
            tolerance=GRADCHECK_TOLERANCE,
            target=target.value,
        )
        report = result if report is None else report.merge(result)
    if report is None:
        raise UsageError("gradcheck: --cases must be >= 1")
    print(f"{target.value}: max_rel_err={report.max_rel_err:.3e} probes={len(report.probes)}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_bench(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    features = rng.uniform(0.0, args.n ** (1.0 / args.d), size=(args.n, args.d))
    x = rng.standard_normal((args.n, args.c))
    bank = gaussian_init(args.d, args.s, 1.0)
    timings: dict[str, list[float]] = {
        stage: [] for stage in ("build", "forward", "grad_input", "grad_filter")
    }
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        ops = build_operators(features, 1.0, args.s)
        t1 = time.perf_counter()
        y = forward(x, ops, bank, threads=args.threads)
        t2 = time.perf_counter()
        grad_input(y, ops, bank, threads=args.threads)
        t3 = time.perf_counter()
        grad_filter(y, x, ops, bank, threads=args.threads)
        t4 = time.perf_counter()
        for stage, dt in zip(timings, (t1 - t0, t2 - t1, t3 - t2, t4 - t3), strict=True):
            timings[stage].append(dt)
    print(f"n={args.n} d={args.d} s={args.s} c={args.c} t={filter_size(args.d, args.s)}")
    for stage, values in timings.items():
        ms = np.asarray(values) * 1e3
        print(f"{stage:<12} {ms.mean():10.3f} ± {ms.std():.3f} ms")
    return EXIT_OK


def _cmd_oracle_diff(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    extent = 3.0
    features_in = rng.uniform(0.0, extent, size=(args.n, args.d))
    features_out = rng.uniform(0.0, extent, size=(args.n, args.d))
    t = filter_size(args.d, args.s)
    bank = FilterBank(weights=rng.standard_normal((args.c, args.c, t)), d=args.d, s=args.s)
    x = rng.standard_normal((args.n, args.c))
    ops = build_operators(features_in, 1.0, args.s, features_out=features_out)
    fast = forward(x, ops, bank, chunk=args.chunk, threads=args.threads)
    dense = apply_dense(dense_operator(ops, bank), x)
    err = float(np.max(np.abs(fast - dense)) / max(float(np.max(np.abs(dense))), 1e-300))
    print(f"max_rel_err={err:.3e} m={ops.m} t={t}")
    return EXIT_OK if err < ORACLE_TOLERANCE else EXIT_CHECK_FAILED


HANDLERS: dict[str, Callable[[argparse.Namespace], int]] = {
    Command.FILTER.value: _cmd_filter,
    Command.UPSAMPLE.value: _cmd_upsample,
    Command.DENOISE_TRAIN.value: _cmd_denoise_train,
    Command.DENOISE_APPLY.value: _cmd_denoise_apply,
    Command.MESH_DENOISE.value: _cmd_mesh_denoise,
    Command.CRF.value: _cmd_crf,
    Command.BI_FILTER.value: _cmd_bi_filter,
    Command.GRADCHECK.value: _cmd_gradcheck,
    Command.BENCH.value: _cmd_bench,
    Command.ORACLE_DIFF.value: _cmd_oracle_diff,
}


def _one_line(error: Exception) -> str:
    text = str(error).strip().splitlines()
    return text[0] if text else type(error).__name__


def run(argv: Sequence[str], environ: dict[str, str] | None = None) -> int:
    """Run one command and return its exit code."""
    try:
        args = parse_layered(argv, environ)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except (PermutoError, OSError) as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_DATA
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    logger.debug("running %s", args.command)
    try:
        return HANDLERS[args.command](args)
    except UsageError as e:
        print(f"permutofilt {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PermutoError, OSError, ValidationError) as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_DATA


def main() -> int:
    """Entry point for the permutofilt command."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
