"""Splat, blur and slice on the permutohedral lattice, forward and backward.

The filter is the composition ``x' = S_slice B S_splat x``. Splat and slice are sparse
barycentric interpolation matrices; the blur ``B`` gathers the ``t`` canonical neighbors of every
populated vertex through a ``t x m`` index table and contracts them with the filter taps.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import TypeVar

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

from permutofilt.errors import (
    EmptyInputError,
    InvalidFeatureError,
    ParameterError,
    ShapeMismatchError,
)
from permutofilt.lattice.core import (
    FloatArray,
    IntArray,
    embed,
    find_simplices,
    mirror_taps,
    neighbor_offsets,
)
from permutofilt.lattice.index import MISSING, LatticeIndex, build_index
from permutofilt.ops.filter_bank import FilterBank

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 4096

_T = TypeVar("_T")


@dataclass(frozen=True)
class Signal:
    """``n`` points carrying ``c`` channels, each with a ``d``-dimensional feature vector."""

    values: FloatArray
    features: FloatArray

    def __post_init__(self) -> None:
        values = as_2d(self.values)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise InvalidFeatureError(f"features must be (n, d), got {features.shape}")
        if features.shape[0] != values.shape[0]:
            raise ShapeMismatchError(
                f"{values.shape[0]} values but {features.shape[0]} feature vectors"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "features", features)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])


def as_2d(values: npt.ArrayLike) -> FloatArray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        return v[:, np.newaxis]
    if v.ndim != 2:
        raise ShapeMismatchError(f"signal must be (n,) or (n, c), got {v.shape}")
    return v


def scale_features(features: npt.ArrayLike, scales: npt.ArrayLike) -> FloatArray:
    """Apply the diagonal feature scaling; ``scales`` broadcasts from a scalar."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] < 1:
        raise InvalidFeatureError(f"features must be (n, d) with d >= 1, got {f.shape}")
    if f.shape[0] == 0:
        raise EmptyInputError("no feature vectors given")
    lam = np.broadcast_to(np.asarray(scales, dtype=np.float64), (f.shape[1],))
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise InvalidFeatureError(f"feature scales must be finite and > 0, got {lam.tolist()}")
    if not np.all(np.isfinite(f)):
        raise InvalidFeatureError("features contain non-finite values")
    return f * lam


@dataclass(frozen=True)
class SplatOperator:
    """Barycentric map between ``n`` points and ``m`` lattice vertices.

    ``vertex_index[i, k]`` is the dense vertex of the remainder-``k`` corner of point ``i``
    (``MISSING`` when unpopulated, with weight 0). ``scatter`` applies the ``m x n`` matrix
    (splatting), ``gather`` its transpose (slicing).
    """

    vertex_index: IntArray
    weights: FloatArray
    m: int

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        valid = self.vertex_index != MISSING
        rows = self.vertex_index[valid]
        cols = np.broadcast_to(np.arange(self.n)[:, np.newaxis], self.vertex_index.shape)[valid]
        return sp.csr_matrix((self.weights[valid], (rows, cols)), shape=(self.m, self.n))

    @cached_property
    def transposed(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def scatter(self, values: npt.ArrayLike) -> FloatArray:
        x = as_2d(values)
        if x.shape[0] != self.n:
            raise ShapeMismatchError(f"scatter expects {self.n} points, got {x.shape[0]}")
        return np.asarray(self.matrix @ x)

    def gather(self, lattice_values: npt.ArrayLike) -> FloatArray:
        v = as_2d(lattice_values)
        if v.shape[0] != self.m:
            raise ShapeMismatchError(f"gather expects {self.m} vertices, got {v.shape[0]}")
        return np.asarray(self.transposed @ v)

    def point_weight_sums(self) -> FloatArray:
        return self.weights.sum(axis=1)


@dataclass(frozen=True)
class BlurNeighborhood:
    """``neighbor_index[k, j]``: dense index of the k-th canonical neighbor of vertex ``j``."""

    neighbor_index: IntArray
    d: int
    s: int

    @property
    def t(self) -> int:
        return int(self.neighbor_index.shape[0])

    @property
    def m(self) -> int:
        return int(self.neighbor_index.shape[1])

    @cached_property
    def gather_index(self) -> IntArray:
        # MISSING points at the zero row appended after the m populated vertices
        return np.where(self.neighbor_index == MISSING, self.m, self.neighbor_index)


@dataclass(frozen=True)
class LatticeOperators:
    """Splat, blur and slice operators for one pair of input/output feature sets."""

    splat: SplatOperator
    slice: SplatOperator
    blur: BlurNeighborhood
    index: LatticeIndex
    shared: bool

    @property
    def n_in(self) -> int:
        return self.splat.n

    @property
    def n_out(self) -> int:
        return self.slice.n

    @property
    def m(self) -> int:
        return self.index.m

    @property
    def d(self) -> int:
        return self.blur.d

    @property
    def s(self) -> int:
        return self.blur.s

    @cached_property
    def self_pairs(self) -> tuple[IntArray, FloatArray]:
        """Tap index and weight product of every vertex pair inside each point's simplex."""
        if not self.shared:
            raise ShapeMismatchError("self contribution needs identical input and output points")
        keys = self.index.keys[self.splat.vertex_index]  # (n, d+1, d+1)
        diff = keys[:, np.newaxis, :, :] - keys[:, :, np.newaxis, :]  # b - a, indexed [i, a, b]
        taps = LatticeIndex(neighbor_offsets(self.d, self.s)).lookup(diff)
        t = self.splat.weights
        return taps, t[:, :, np.newaxis] * t[:, np.newaxis, :]


def build_splat(
    features_in: npt.ArrayLike, scales: npt.ArrayLike
) -> tuple[SplatOperator, LatticeIndex]:
    """Splat operator of the input points and the index of the vertices they populate."""
    batch = find_simplices(embed(scale_features(features_in, scales)))
    index = build_index(batch)
    vertex_index = index.lookup(batch.vertices)
    splat = SplatOperator(vertex_index=vertex_index, weights=batch.barycentric, m=index.m)
    return splat, index


def build_slice(
    features_out: npt.ArrayLike, scales: npt.ArrayLike, index: LatticeIndex
) -> SplatOperator:
    """Slice operator of the output points against an existing vertex index."""
    f = scale_features(features_out, scales)
    if f.shape[1] != index.d:
        raise ShapeMismatchError(f"output features are {f.shape[1]}-D, lattice is {index.d}-D")
    batch = find_simplices(embed(f))
    vertex_index = index.lookup(batch.vertices)
    weights = np.where(vertex_index == MISSING, 0.0, batch.barycentric)
    uncovered = int(np.count_nonzero(np.all(vertex_index == MISSING, axis=1)))
    if uncovered:
        logger.debug("%d of %d output points touch no populated vertex", uncovered, len(batch))
    return SplatOperator(vertex_index=vertex_index, weights=weights, m=index.m)


def build_blur(index: LatticeIndex, s: int) -> BlurNeighborhood:
    """Gather table of the ``t`` canonical neighbors of every populated vertex."""
    offsets = neighbor_offsets(index.d, s)
    neighbors = index.keys[np.newaxis, :, :] + offsets[:, np.newaxis, :]
    table = index.lookup(neighbors)
    logger.debug(
        "blur table t=%d m=%d, %.1f%% neighbors populated",
        table.shape[0],
        table.shape[1],
        100.0 * np.count_nonzero(table != MISSING) / max(table.size, 1),
    )
    return BlurNeighborhood(neighbor_index=table, d=index.d, s=s)


def build_operators(
    features_in: npt.ArrayLike,
    scales: npt.ArrayLike,
    s: int,
    features_out: npt.ArrayLike | None = None,
) -> LatticeOperators:
    """Build splat, blur and slice; slicing reuses the splat when ``features_out`` is None."""
    splat, index = build_splat(features_in, scales)
    if features_out is None:
        slice_op, shared = splat, True
    else:
        slice_op, shared = build_slice(features_out, scales, index), False
    blur = build_blur(index, s)
    logger.debug("operators n_in=%d n_out=%d m=%d t=%d", splat.n, slice_op.n, index.m, blur.t)
    return LatticeOperators(splat=splat, slice=slice_op, blur=blur, index=index, shared=shared)


def _chunks(m: int, chunk: int) -> Iterator[slice]:
    if chunk < 1:
        raise ParameterError(f"chunk must be >= 1, got {chunk}")
    for start in range(0, m, chunk):
        yield slice(start, min(start + chunk, m))


def _map_chunks(fn: Callable[[slice], _T], m: int, chunk: int, threads: int) -> list[_T]:
    blocks = list(_chunks(m, chunk))
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, blocks))
    return [fn(block) for block in blocks]


def _check_bank(values: FloatArray, blur: BlurNeighborhood, bank: FilterBank) -> None:
    if values.shape[0] != blur.m:
        raise ShapeMismatchError(f"lattice signal has {values.shape[0]} rows, blur has {blur.m}")
    if bank.t != blur.t:
        raise ShapeMismatchError(f"filter has {bank.t} taps, neighborhood has {blur.t}")
    if not bank.is_scalar and values.shape[1] != bank.c_in:
        raise ShapeMismatchError(f"filter expects {bank.c_in} channels, got {values.shape[1]}")


def convolve_lattice(
    values: npt.ArrayLike,
    blur: BlurNeighborhood,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """``l'[j, o] = sum_k sum_i B[o, i, k] * l[nbr[k, j], i]`` with missing neighbors as zero.

    Vertices are processed in blocks of ``chunk`` rows; every block writes disjoint rows, so the
    result does not depend on ``chunk`` or ``threads``.
    """
    lat = as_2d(values)
    _check_bank(lat, blur, bank)
    padded = np.vstack([lat, np.zeros((1, lat.shape[1]))])
    index = blur.gather_index
    c_out = lat.shape[1] if bank.is_scalar else bank.c_out
    out = np.empty((blur.m, c_out), dtype=np.float64)
    taps = bank.weights[0, 0] if bank.is_scalar else bank.weights

    def run(block: slice) -> None:
        gathered = padded[index[:, block]]  # (t, rows, c_in)
        if bank.is_scalar:
            out[block] = np.einsum("k,kjc->jc", taps, gathered)
        else:
            out[block] = np.einsum("oik,kji->jo", taps, gathered)

    _map_chunks(run, blur.m, chunk, threads)
    return out


def adjoint_bank(bank: FilterBank) -> FilterBank:
    """Bank of the transposed blur: channels swapped, every tap moved to its mirrored offset."""
    mirrored = bank.weights[:, :, mirror_taps(bank.d, bank.s)]
    return FilterBank(weights=mirrored.transpose(1, 0, 2), d=bank.d, s=bank.s)


def convolve_lattice_adjoint(
    grad: npt.ArrayLike,
    blur: BlurNeighborhood,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """Apply ``B^T``: the neighbor relation is symmetric, so this is a gather with mirrored taps."""
    return convolve_lattice(grad, blur, adjoint_bank(bank), chunk=chunk, threads=threads)


def lattice_filter_gradient(
    grad: npt.ArrayLike,
    values: npt.ArrayLike,
    blur: BlurNeighborhood,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """``dL/dB[o, i, k] = sum_j grad[j, o] * l[nbr[k, j], i]``, shaped like ``bank.weights``."""
    g = as_2d(grad)
    lat = as_2d(values)
    _check_bank(lat, blur, bank)
    expected = lat.shape[1] if bank.is_scalar else bank.c_out
    if g.shape != (blur.m, expected):
        raise ShapeMismatchError(f"upstream gradient is {g.shape}, expected {(blur.m, expected)}")
    padded = np.vstack([lat, np.zeros((1, lat.shape[1]))])
    index = blur.gather_index

    def run(block: slice) -> FloatArray:
        gathered = padded[index[:, block]]
        if bank.is_scalar:
            return np.einsum("jc,kjc->k", g[block], gathered).reshape(1, 1, -1)
        return np.einsum("jo,kji->oik", g[block], gathered)

    partials = _map_chunks(run, blur.m, chunk, threads)
    total = np.zeros(bank.weights.shape, dtype=np.float64)
    for part in partials:
        total += part
    return total


def forward(
    x: npt.ArrayLike,
    ops: LatticeOperators,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """``S_slice B S_splat x`` for a signal of shape (n_in,) or (n_in, c)."""
    lattice = ops.splat.scatter(x)
    blurred = convolve_lattice(lattice, ops.blur, bank, chunk=chunk, threads=threads)
    return ops.slice.gather(blurred)


def grad_input(
    upstream: npt.ArrayLike,
    ops: LatticeOperators,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """``S_splat^T B^T S_slice^T dL/dx'``; does not depend on the forward input."""
    lattice = ops.slice.scatter(upstream)
    blurred = convolve_lattice_adjoint(lattice, ops.blur, bank, chunk=chunk, threads=threads)
    return ops.splat.gather(blurred)


def grad_filter(
    upstream: npt.ArrayLike,
    x: npt.ArrayLike,
    ops: LatticeOperators,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """``dL/dB`` as the product of sliced-back upstream and splatted input per neighbor tap."""
    sliced_back = ops.slice.scatter(upstream)
    splatted = ops.splat.scatter(x)
    return lattice_filter_gradient(
        sliced_back, splatted, ops.blur, bank, chunk=chunk, threads=threads
    )


@dataclass(frozen=True)
class NormalizedOutput:
    """Homogeneous-coordinate filtering result ``numerator / denominator``."""

    values: FloatArray
    numerator: FloatArray
    denominator: FloatArray
    covered: npt.NDArray[np.bool_]


def _require_scalar(bank: FilterBank) -> None:
    if not bank.is_scalar:
        raise ShapeMismatchError(
            f"normalized filtering needs a scalar bank, got {bank.c_out}x{bank.c_in}"
        )


def normalized_forward(
    x: npt.ArrayLike,
    ops: LatticeOperators,
    bank: FilterBank,
    eps: float = 1e-12,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> NormalizedOutput:
    """Filter ``[x, 1]`` with a scalar bank and divide by the filtered ones channel.

    Output points whose filtered weight vanishes get 0.
    """
    _require_scalar(bank)
    xs = as_2d(x)
    stacked = np.hstack([xs, np.ones((xs.shape[0], 1))])
    filtered = forward(stacked, ops, bank, chunk=chunk, threads=threads)
    numerator = filtered[:, :-1]
    denominator = filtered[:, -1]
    covered = np.abs(denominator) > eps
    safe = np.where(covered, denominator, 1.0)
    values = np.where(covered[:, np.newaxis], numerator / safe[:, np.newaxis], 0.0)
    return NormalizedOutput(
        values=values, numerator=numerator, denominator=denominator, covered=covered
    )


def _quotient_grads(
    upstream: npt.ArrayLike, out: NormalizedOutput
) -> tuple[FloatArray, FloatArray]:
    g = as_2d(upstream)
    safe = np.where(out.covered, out.denominator, 1.0)[:, np.newaxis]
    mask = out.covered[:, np.newaxis]
    g_num = np.where(mask, g / safe, 0.0)
    g_den = np.where(mask, -np.sum(g * out.numerator, axis=1, keepdims=True) / safe**2, 0.0)
    return g_num, g_den


def normalized_grad_input(
    upstream: npt.ArrayLike,
    out: NormalizedOutput,
    ops: LatticeOperators,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    _require_scalar(bank)
    g_num, _ = _quotient_grads(upstream, out)
    return grad_input(g_num, ops, bank, chunk=chunk, threads=threads)


def normalized_grad_filter(
    upstream: npt.ArrayLike,
    x: npt.ArrayLike,
    out: NormalizedOutput,
    ops: LatticeOperators,
    bank: FilterBank,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """Filter gradient through the quotient: numerator path plus ones-channel path."""
    _require_scalar(bank)
    g_num, g_den = _quotient_grads(upstream, out)
    ones = np.ones((ops.n_in, 1))
    return grad_filter(g_num, x, ops, bank, chunk=chunk, threads=threads) + grad_filter(
        g_den, ones, ops, bank, chunk=chunk, threads=threads
    )


def self_contribution(ops: LatticeOperators, bank: FilterBank) -> FloatArray:
    """Diagonal of ``S_slice B S_splat``: the response of every point to its own unit impulse."""
    _require_scalar(bank)
    taps, pair_weights = ops.self_pairs
    w = np.append(bank.weights[0, 0], 0.0)  # MISSING taps read the trailing zero
    return np.einsum("iab,iab->i", pair_weights, w[taps])


def self_contribution_grad(
    coef: npt.ArrayLike, ops: LatticeOperators, bank: FilterBank
) -> FloatArray:
    """Gradient of ``sum_i coef[i] * self_contribution[i]`` with respect to the taps."""
    _require_scalar(bank)
    taps, pair_weights = ops.self_pairs
    c = np.asarray(coef, dtype=np.float64).reshape(-1)
    contrib = c[:, np.newaxis, np.newaxis] * pair_weights
    valid = taps != MISSING
    grad = np.bincount(taps[valid], weights=contrib[valid], minlength=bank.t)
    return grad.reshape(1, 1, -1)


def dense_operator(ops: LatticeOperators, bank: FilterBank) -> FloatArray:
    """Materialize the filter as a dense ``(c_out, c_in, n_out, n_in)`` tensor.

    A scalar bank yields shape ``(1, 1, n_out, n_in)``, applied to every channel.
    """
    splat = ops.splat.matrix.toarray()
    slice_dense = ops.slice.transposed.toarray()
    nbr = ops.blur.neighbor_index
    rows, cols = np.nonzero(nbr.T != MISSING)  # rows: vertex j, cols: tap k
    out = np.empty((bank.c_out, bank.c_in, ops.n_out, ops.n_in))
    for o in range(bank.c_out):
        for i in range(bank.c_in):
            blur = np.zeros((ops.m, ops.m))
            np.add.at(blur, (rows, nbr[cols, rows]), bank.weights[o, i, cols])
            out[o, i] = slice_dense @ blur @ splat
    return out


def apply_dense(operator: FloatArray, x: npt.ArrayLike) -> FloatArray:
    """Apply a tensor from ``dense_operator`` to a signal (n_in, c)."""
    xs = as_2d(x)
    if operator.shape[0] == 1 and operator.shape[1] == 1:
        return np.asarray(operator[0, 0] @ xs)
    return np.einsum("oipn,ni->po", operator, xs)


def filter_signal(
    signal: Signal,
    features_out: npt.ArrayLike | None,
    scales: npt.ArrayLike,
    bank: FilterBank,
    normalize: bool = False,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> FloatArray:
    """Build the operators for ``signal`` and filter it at ``features_out`` (default: inputs)."""
    if signal.d != bank.d:
        raise ShapeMismatchError(f"signal features are {signal.d}-D, filter is {bank.d}-D")
    ops = build_operators(signal.features, scales, bank.s, features_out=features_out)
    if normalize:
        return normalized_forward(signal.values, ops, bank, chunk=chunk, threads=threads).values
    return forward(signal.values, ops, bank, chunk=chunk, threads=threads)


def bnn_identity(
    x: npt.ArrayLike,
    features_in: npt.ArrayLike,
    features_out: npt.ArrayLike,
    scales: npt.ArrayLike,
) -> FloatArray:
    """Splat then slice with a center-only filter, normalized by the splatted weight."""
    signal = Signal(values=as_2d(x), features=np.asarray(features_in, dtype=np.float64))
    bank = FilterBank.identity(signal.d, 0)
    return filter_signal(signal, features_out, scales, bank, normalize=True)
