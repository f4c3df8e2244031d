#!/usr/bin/env python3
"""Run the desk-scale acceptance checks and print a summary."""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

RESULTS: list[tuple[str, bool, str]] = []


def record(name, passed, detail, started):
    elapsed = time.perf_counter() - started
    RESULTS.append((name, passed, detail))
    mark = "✅" if passed else "❌"
    print(f"{mark} {detail} ({elapsed:.1f}s)")


def check_oracle():
    """Fast path against the materialized operator."""
    print("\n🧮 Dense Operator Oracle")
    print("=" * 50)

    from permutofilt.lattice.core import filter_size
    from permutofilt.ops.filter_bank import FilterBank
    from permutofilt.ops.permuto import apply_dense, build_operators, dense_operator, forward

    started = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        n, d = int(rng.integers(2, 51)), int(rng.integers(1, 4))
        s, c = int(rng.integers(0, 3)), int(rng.integers(1, 4))
        f_in = rng.uniform(0.0, 3.0, size=(n, d))
        f_out = rng.uniform(0.0, 3.0, size=(n, d))
        bank = FilterBank(weights=rng.standard_normal((c, c, filter_size(d, s))), d=d, s=s)
        ops = build_operators(f_in, 1.0, s, features_out=f_out)
        x = rng.standard_normal((n, c))
        dense = apply_dense(dense_operator(ops, bank), x)
        err = np.max(np.abs(forward(x, ops, bank) - dense)) / max(np.max(np.abs(dense)), 1e-300)
        worst = max(worst, float(err))
    record("oracle", worst < 1e-10, f"max rel err {worst:.2e} over 200 configs", started)


def check_gradients():
    """Finite differences for every differentiable block."""
    print("\n📐 Gradient Suite")
    print("=" * 50)

    from permutofilt.training.blocks import GradTarget, make_block
    from permutofilt.training.gradcheck import grad_check

    for target in GradTarget:
        started = time.perf_counter()
        report = None
        for seed in range(20):
            result = grad_check(make_block(target, seed=seed), seed=seed, target=target.value)
            report = result if report is None else report.merge(result)
        detail = f"{target.value}: max rel err {report.max_rel_err:.2e}"
        record(f"grad:{target.value}", report.passed, detail, started)


def check_combinatorics():
    """Filter sizes against the hop enumeration and known values."""
    print("\n🔢 Neighborhood Sizes")
    print("=" * 50)

    from permutofilt.lattice.core import filter_size, hop_vectors

    started = time.perf_counter()
    counts = all(
        filter_size(d, s) == len(hop_vectors(d, s)) for d in range(1, 7) for s in range(0, 4)
    )
    known = {(2, 1): 7, (2, 2): 19, (3, 2): 65, (5, 2): 665}
    values = all(filter_size(d, s) == t for (d, s), t in known.items())
    record("combinatorics", counts and values, f"known sizes {sorted(known.values())}", started)


def check_convexity():
    """Normalized splat/slice stays inside the input range."""
    print("\n📦 Splat/Slice Convexity")
    print("=" * 50)

    from permutofilt.ops.permuto import bnn_identity

    started = time.perf_counter()
    rng = np.random.default_rng(1)
    inside = True
    for _ in range(100):
        d = int(rng.integers(1, 4))
        f_in = rng.uniform(0.0, 2.0, size=(60, d))
        x = rng.standard_normal((60, 2))
        out = bnn_identity(x, f_in, f_in, 1.0)
        covered = np.any(out != 0.0, axis=1)
        lo, hi = x.min(axis=0) - 1e-9, x.max(axis=0) + 1e-9
        inside &= bool(np.all((out[covered] >= lo) & (out[covered] <= hi)))
    record("convexity", inside, "100 cases within per-channel extrema", started)


def check_chunks():
    """Lattice convolution does not depend on the block size."""
    print("\n🧱 Chunk Invariance")
    print("=" * 50)

    from permutofilt.ops.filter_bank import gaussian_init
    from permutofilt.ops.permuto import build_operators, convolve_lattice

    started = time.perf_counter()
    rng = np.random.default_rng(2)
    ops = build_operators(rng.uniform(0.0, 4.0, size=(300, 3)), 1.0, 2)
    lat = rng.standard_normal((ops.m, 2))
    bank = gaussian_init(3, 2, 1.0)
    outs = [convolve_lattice(lat, ops.blur, bank, chunk=k) for k in (1, 7, 4096)]
    same = all(np.allclose(o, outs[0], rtol=1e-12, atol=0.0) for o in outs[1:])
    record("chunks", same, "chunk sizes 1, 7, 4096 agree", started)


def check_denoising():
    """Held-out PSNR ordering on synthetic images."""
    print("\n🖼️ Denoising Direction")
    print("=" * 50)

    from permutofilt.config import TrainingConfig
    from permutofilt.pipelines.denoise import default_recipe, denoise_report
    from permutofilt.pipelines.reporting import format_summary, method_means
    from permutofilt.pipelines.synthetic import denoising_pairs

    started = time.perf_counter()
    pairs = denoising_pairs(seed=0, count=10)
    config = TrainingConfig(epochs=5, lr=0.02, seed=0)
    rows, _ = denoise_report(pairs[:5], pairs[5:], default_recipe(), 2, config)
    print(format_summary(rows))
    means = method_means(rows)
    passed = means["Learned"] >= means["Gauss"] - 0.05 and means["Gauss"] >= means["Noisy"] + 1.0
    detail = f"Noisy {means['Noisy']:.2f} Gauss {means['Gauss']:.2f} Learned {means['Learned']:.2f}"
    record("denoising", passed, detail, started)


def check_upsampling():
    """Bilateral upsampling against bicubic at 4x."""
    print("\n🔍 Upsampling Direction")
    print("=" * 50)

    from permutofilt.ops.filter_bank import gaussian_init
    from permutofilt.pipelines.synthetic import piecewise_constant_image
    from permutofilt.pipelines.upsample import default_recipe, upsample_report

    started = time.perf_counter()
    rng = np.random.default_rng(3)
    images = [piecewise_constant_image(rng, 64, 64) for _ in range(5)]
    recipe = default_recipe(4)
    rows = upsample_report(images, 4, recipe, gaussian_init(recipe.dim, 2, 1.0))
    scores = {(r.method, r.sample): r.value for r in rows}
    wins = sum(
        scores[("Gauss", name)] > scores[("Bicubic", name)]
        for name in {r.sample for r in rows}
    )
    record("upsampling", wins >= 4, f"bilateral beats bicubic on {wins}/5", started)


def check_crf():
    """Marginals stay row-stochastic over the mean-field steps."""
    print("\n🏷️ Mean-Field Marginals")
    print("=" * 50)

    from permutofilt.crf.kernels import LatticeKernel
    from permutofilt.crf.meanfield import mf_run
    from permutofilt.ops.filter_bank import gaussian_init

    started = time.perf_counter()
    rng = np.random.default_rng(4)
    features = rng.uniform(0.0, 5.0, size=(200, 2))
    kernel = LatticeKernel.from_features(features, 1.0, gaussian_init(2, 1, 1.0), 3.0)
    state = mf_run(rng.normal(size=(200, 4)), [kernel], steps=10)
    err = float(np.max(np.abs(state.q.sum(axis=1) - 1.0)))
    record("crf", err < 1e-12, f"row sums within {err:.1e}", started)


def check_gram():
    """Explicit Gaussian affinities are row-normalized."""
    print("\n🌐 Gram Kernel")
    print("=" * 50)

    from permutofilt.inception import build_gram

    started = time.perf_counter()
    rng = np.random.default_rng(5)
    kernel = build_gram(rng.normal(size=(80, 3)), rng.normal(size=(40, 3)), 1.0, 0.5)
    err = float(np.max(np.abs(kernel.matrix.sum(axis=1) - 1.0)))
    record("gram", err < 1e-9, f"row sums within {err:.1e}", started)


def check_determinism():
    """Two seeded training runs write identical filter files."""
    print("\n🔁 Determinism")
    print("=" * 50)

    from permutofilt.cli import EXIT_OK, run

    started = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        outputs = []
        for name in ("a.pbf", "b.pbf"):
            out = Path(tmp) / name
            argv = ["denoise-train", "--synthetic", "3", "--epochs", "2", "--seed", "9"]
            ok = run([*argv, "--out", str(out)]) == EXIT_OK
            outputs.append(out.read_bytes() if ok else b"")
    same = bool(outputs[0]) and outputs[0] == outputs[1]
    record("determinism", same, f"{len(outputs[0])} identical bytes", started)


CHECKS = [
    check_oracle,
    check_gradients,
    check_combinatorics,
    check_convexity,
    check_chunks,
    check_crf,
    check_gram,
    check_determinism,
    check_upsampling,
    check_denoising,
]


def main():
    print("\n" + "=" * 60)
    print("  🧪 permutofilt - Acceptance Run")
    print("=" * 60)

    for check in CHECKS:
        try:
            check()
        except Exception as e:
            RESULTS.append((check.__name__, False, str(e)))
            print(f"❌ {e}")

    failed = [name for name, passed, _ in RESULTS if not passed]
    print("\n" + "=" * 60)
    if failed:
        print(f"  ❌ {len(failed)} of {len(RESULTS)} checks failed: {', '.join(failed)}")
    else:
        print(f"  ✅ All {len(RESULTS)} checks passed!")
    print("=" * 60 + "\n")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
