"""Sketch generation for the solver: weighted single rows, partition blocks,
Gaussian vectors and blocks, and deterministic finite Gaussian collections,
plus the streaming quality validator for finite collections.

Finite collections are never stored: member ``k`` of a collection with seed
``seed`` is regenerated on demand from a counter-based generator keyed on
``(seed, k)``, so addressing any member is O(1) and two processes always see
the same collection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateInputError, InputError, ParameterError, ResourceLimitError


class SketchKind(str, Enum):
    SINGLE_ROW_WEIGHTED = "single_row_weighted"
    BLOCK_PARTITION = "block_partition"
    GAUSSIAN_VECTOR = "gaussian_vector"
    GAUSSIAN_BLOCK = "gaussian_block"
    FINITE_GAUSSIAN_COLLECTION = "finite_gaussian_collection"


ROW_KINDS = frozenset({SketchKind.SINGLE_ROW_WEIGHTED, SketchKind.BLOCK_PARTITION})
ONE_COLUMN_KINDS = frozenset({SketchKind.SINGLE_ROW_WEIGHTED, SketchKind.GAUSSIAN_VECTOR})


@dataclass(frozen=True)
class SketchSpec:
    """Description of one sketch distribution.

    ``block_size`` is forced to 1 for the single-row and Gaussian-vector
    kinds; ``collection_size`` and ``seed`` only matter for the finite
    Gaussian collection and are normalized away otherwise.
    """

    kind: SketchKind
    block_size: int = 1
    collection_size: int = 1
    seed: int = 0

    def __post_init__(self):
        kind = SketchKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.block_size < 1:
            raise ParameterError(f"block_size must be >= 1, got {self.block_size}")
        if kind in ONE_COLUMN_KINDS:
            object.__setattr__(self, "block_size", 1)
        if kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
            if self.collection_size < 1:
                raise ParameterError(f"collection_size must be >= 1, got {self.collection_size}")
        else:
            object.__setattr__(self, "collection_size", 1)
            object.__setattr__(self, "seed", 0)

    @property
    def label(self) -> str:
        """Short identifier used in file names and summary tables."""
        base = f"{self.kind.value}_s{self.block_size}"
        if self.kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
            base += f"_N{self.collection_size}"
        return base


@dataclass(frozen=True)
class SketchDraw:
    """One realized sketch: either selected row indices or an explicit matrix."""

    draw_index: int
    row_indices: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.row_indices is None) == (self.matrix is None):
            raise InputError("exactly one of row_indices / matrix must be set")


class CardinalityBounds(NamedTuple):
    n_min: int
    n_max: float
    feasible: bool


@dataclass(frozen=True)
class GoodCollectionReport:
    """Outcome of the three quality conditions on a finite sketch collection:
    bounded operator norms, small empirical cross-moments between distinct
    entries, and per-entry empirical second moments close to one.
    """

    n: int
    m: int
    s: int
    max_opnorm: float
    worst_cross_sum: float
    worst_diag_dev: float
    cond1_ok: bool
    cond2_ok: bool
    cond3_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.cond1_ok and self.cond2_ok and self.cond3_ok

    def recompute(self) -> tuple[bool, bool, bool]:
        """Re-derive the three flags from the recorded statistics."""
        return (
            self.max_opnorm <= 3.0 * math.sqrt(self.m),
            self.worst_cross_sum <= self.n / (4.0 * self.m),
            self.worst_diag_dev <= self.n / 2.0,
        )


def partition_rows(z: int, block_size: int, m: int) -> np.ndarray:
    """Row indices of partition block ``z``; the final block may be shorter."""
    start = z * block_size
    if not 0 <= start < m:
        raise ParameterError(f"block index {z} out of range for m={m}, s={block_size}")
    return np.arange(start, min(start + block_size, m))


def row_weights(a: np.ndarray) -> np.ndarray:
    """Sampling weights proportional to squared row norms."""
    sq = np.einsum("ij,ij->i", a, a)
    total = sq.sum()
    if total == 0.0:
        raise DegenerateInputError("all rows have zero norm; weighted row sampling undefined")
    return sq / total


def _member_doubles(m: int, s: int) -> int:
    # Uniform doubles consumed per collection member, padded to whole
    # counter blocks (4 doubles each) so member k starts at an exact offset.
    need = m * s
    if need % 2:
        need += 1
    return -(-need // 4) * 4


def _box_muller(u: np.ndarray) -> np.ndarray:
    """Standard normals from uniform [0,1) doubles along the last axis.

    Fixed consumption (unlike rejection samplers), which is what makes
    counter-offset member addressing possible.
    """
    half = u.shape[-1] // 2
    radius = np.sqrt(-2.0 * np.log1p(-u[..., :half]))
    theta = (2.0 * np.pi) * u[..., half:]
    return np.concatenate([radius * np.cos(theta), radius * np.sin(theta)], axis=-1)


def collection_members(seed: int, start: int, count: int, m: int, s: int) -> np.ndarray:
    """Members ``start .. start+count-1`` of the finite Gaussian collection, as
    a ``(count, m, s)`` array.

    Member ``k`` is a pure function of ``(seed, k)``: the collection lives on a
    single counter-based stream keyed by the seed, with member ``k`` occupying
    a fixed counter range, so any member or contiguous slab regenerates in
    O(1 + size) without touching the rest.
    """
    per = _member_doubles(m, s)
    bitgen = np.random.Philox(counter=start * (per // 4), key=seed & 0xFFFFFFFFFFFFFFFF)
    u = np.random.Generator(bitgen).random(count * per).reshape(count, per)
    return _box_muller(u)[:, : m * s].reshape(count, m, s)


def collection_matrix(seed: int, index: int, m: int, s: int) -> np.ndarray:
    """Member ``index`` of the finite Gaussian collection with the given seed."""
    return collection_members(seed, index, 1, m, s)[0]


def draw_sketch(
    spec: SketchSpec,
    a: np.ndarray,
    rng: np.random.Generator,
    row_probs: np.ndarray | None = None,
) -> SketchDraw:
    """Draw one sketch for the matrix ``a`` according to ``spec``.

    ``row_probs`` optionally supplies precomputed weighted-row probabilities so
    a caller iterating many times does not recompute them every draw.
    """
    m = a.shape[0]
    s = spec.block_size
    kind = spec.kind
    if kind is SketchKind.SINGLE_ROW_WEIGHTED:
        probs = row_weights(a) if row_probs is None else row_probs
        i = int(rng.choice(m, p=probs))
        return SketchDraw(draw_index=i, row_indices=np.array([i]))
    if kind is SketchKind.BLOCK_PARTITION:
        if s > m:
            raise ParameterError(f"block size {s} exceeds row count {m}")
        nblocks = -(-m // s)
        z = int(rng.integers(nblocks))
        return SketchDraw(draw_index=z, row_indices=partition_rows(z, s, m))
    if kind is SketchKind.GAUSSIAN_VECTOR:
        return SketchDraw(draw_index=0, matrix=rng.standard_normal((m, 1)))
    if kind is SketchKind.GAUSSIAN_BLOCK:
        return SketchDraw(draw_index=0, matrix=rng.standard_normal((m, s)))
    if kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
        k = int(rng.integers(spec.collection_size))
        return SketchDraw(draw_index=k, matrix=collection_matrix(spec.seed, k, m, s))
    raise ParameterError(f"unknown sketch kind {kind!r}")


def sketched_system(draw: SketchDraw, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Restrict ``(a, b)`` through the sketch: row extraction for row/block
    draws, left-multiplication by the transposed sketch for explicit draws."""
    m = a.shape[0]
    if b.shape[0] != m:
        raise InputError(f"b has length {b.shape[0]}, expected {m}")
    if draw.row_indices is not None:
        rows = draw.row_indices
        if rows.size and (rows.min() < 0 or rows.max() >= m):
            raise InputError("row indices out of range")
        return a[rows], b[rows]
    sk = draw.matrix
    if sk.shape[0] != m:
        raise InputError(f"sketch has {sk.shape[0]} rows, expected {m}")
    return sk.T @ a, sk.T @ b


def explicit_sketch_matrix(draw: SketchDraw, m: int) -> np.ndarray:
    """The 0/1 selector matrix equivalent to a row/block draw."""
    if draw.row_indices is None:
        return draw.matrix
    rows = draw.row_indices
    sk = np.zeros((m, rows.size))
    sk[rows, np.arange(rows.size)] = 1.0
    return sk


def collection_cardinality_bounds(m: int, c: float) -> CardinalityBounds:
    """Cardinality range ``ceil(64 c m^2 ln m) <= N <= floor(e^{m/3})`` for
    which a random collection is a quality collection with high probability."""
    if m < 2:
        raise ParameterError(f"m must be >= 2, got {m}")
    if c <= 3.0:
        raise ParameterError(f"c must exceed 3, got {c}")
    n_min = math.ceil(64.0 * c * m * m * math.log(m))
    exponent = m / 3.0
    n_max = math.floor(math.exp(exponent)) if exponent < 700.0 else math.inf
    return CardinalityBounds(n_min=n_min, n_max=n_max, feasible=n_min <= n_max)


def validate_good_collection(
    spec: SketchSpec,
    m: int,
    matrix_source: Callable[[int], np.ndarray] | None = None,
    batch_size: int = 4096,
    memory_cap_bytes: int = 1 << 30,
) -> GoodCollectionReport:
    """Stream over a finite collection and check the three quality conditions.

    Members are regenerated (never stored); accumulator memory is
    ``s * m * m`` doubles regardless of the collection size, plus one
    fixed-size batch of members.  ``matrix_source`` overrides the default
    regeneration, which tests use to inject pathological members.
    """
    if spec.kind is not SketchKind.FINITE_GAUSSIAN_COLLECTION:
        raise ParameterError("validation applies to finite Gaussian collections only")
    s = spec.block_size
    n_total = spec.collection_size
    if m < s:
        raise ParameterError(f"m={m} must be at least the block size {s}")
    acc_bytes = s * m * m * 8
    if acc_bytes > memory_cap_bytes:
        raise ResourceLimitError(
            f"cross-moment accumulators need {acc_bytes} bytes, cap is {memory_cap_bytes}"
        )

    acc = np.zeros((s, m, m))
    max_opnorm = 0.0
    batch = np.empty((min(batch_size, n_total), m, s))
    start = 0
    while start < n_total:
        stop = min(start + batch_size, n_total)
        if matrix_source is None:
            block = collection_members(spec.seed, start, stop - start, m, s)
        else:
            block = batch[: stop - start]
            for j, k in enumerate(range(start, stop)):
                mat = np.asarray(matrix_source(k), dtype=float)
                if mat.shape != (m, s):
                    raise InputError(
                        f"collection member {k} has shape {mat.shape}, expected {(m, s)}"
                    )
                block[j] = mat
        gram = np.einsum("bmi,bmj->bij", block, block)
        top = np.linalg.eigvalsh(gram)[:, -1]
        max_opnorm = max(max_opnorm, float(np.sqrt(max(top.max(), 0.0))))
        for i in range(s):
            col = block[:, :, i]
            acc[i] += col.T @ col
        start = stop

    idx = np.arange(m)
    diag = acc[:, idx, idx]
    worst_diag_dev = float(np.abs(diag - n_total).max())
    off = acc.copy()
    off[:, idx, idx] = 0.0
    worst_cross_sum = float(np.abs(off).max())
    report = GoodCollectionReport(
        n=n_total,
        m=m,
        s=s,
        max_opnorm=max_opnorm,
        worst_cross_sum=worst_cross_sum,
        worst_diag_dev=worst_diag_dev,
        cond1_ok=max_opnorm <= 3.0 * math.sqrt(m),
        cond2_ok=worst_cross_sum <= n_total / (4.0 * m),
        cond3_ok=worst_diag_dev <= n_total / 2.0,
    )
    return report
