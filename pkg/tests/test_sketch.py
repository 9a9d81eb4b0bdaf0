import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchproj.errors import DegenerateInputError, ParameterError, ResourceLimitError
from sketchproj.sketch import (
    SketchDraw,
    SketchKind,
    SketchSpec,
    collection_cardinality_bounds,
    collection_matrix,
    collection_members,
    draw_sketch,
    explicit_sketch_matrix,
    partition_rows,
    row_weights,
    sketched_system,
    validate_good_collection,
)


def triple_loop_matmul(s, a):
    """Naive S^T A, the oracle for the explicit-sketch route."""
    m, k = s.shape
    _, n = a.shape
    out = np.zeros((k, n))
    for i in range(k):
        for j in range(n):
            acc = 0.0
            for r in range(m):
                acc += s[r, i] * a[r, j]
            out[i, j] = acc
    return out


# --- spec normalization ------------------------------------------------------


def test_one_column_kinds_force_block_size():
    assert SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED, block_size=9).block_size == 1
    assert SketchSpec(SketchKind.GAUSSIAN_VECTOR, block_size=9).block_size == 1


def test_collection_fields_normalized_for_other_kinds():
    spec = SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=4, collection_size=9, seed=5)
    assert spec.collection_size == 1 and spec.seed == 0


def test_bad_spec_params():
    with pytest.raises(ParameterError):
        SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=0)
    with pytest.raises(ParameterError):
        SketchSpec(SketchKind.FINITE_GAUSSIAN_COLLECTION, block_size=2, collection_size=0)


# --- partition blocks --------------------------------------------------------


def test_partition_block_indices():
    assert list(partition_rows(1, 2, 4)) == [2, 3]


def test_partition_final_block_short():
    assert list(partition_rows(2, 3, 8)) == [6, 7]


@settings(max_examples=80, deadline=None)
@given(m=st.integers(1, 40), s=st.integers(1, 10))
def test_partition_covers_all_rows(m, s):
    s = min(s, m)
    nblocks = -(-m // s)
    seen = set()
    for z in range(nblocks):
        rows = partition_rows(z, s, m)
        assert len(rows) <= s
        seen.update(rows.tolist())
    assert seen == set(range(m))


def test_block_draws_stay_in_range():
    a = np.ones((7, 2))
    rng = np.random.default_rng(0)
    spec = SketchSpec(SketchKind.BLOCK_PARTITION, block_size=3)
    for _ in range(20):
        draw = draw_sketch(spec, a, rng)
        assert draw.row_indices.min() >= 0 and draw.row_indices.max() < 7


# --- weighted single row -----------------------------------------------------


def test_single_row_all_mass_on_one_row():
    a = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    rng = np.random.default_rng(1)
    spec = SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED)
    for _ in range(10):
        assert draw_sketch(spec, a, rng).row_indices[0] == 0


def test_single_row_zero_matrix_degenerate():
    with pytest.raises(DegenerateInputError):
        draw_sketch(SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED), np.zeros((3, 2)), np.random.default_rng(0))


def test_row_weights_are_squared_norms():
    a = np.array([[1.0, 0.0], [2.0, 0.0]])
    assert np.allclose(row_weights(a), [0.2, 0.8])


# --- gaussian draws ----------------------------------------------------------


def test_gaussian_vector_shape():
    draw = draw_sketch(SketchSpec(SketchKind.GAUSSIAN_VECTOR), np.ones((5, 2)), np.random.default_rng(0))
    assert draw.matrix.shape == (5, 1)


def test_gaussian_block_moments():
    rng = np.random.default_rng(8)
    spec = SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=5)
    a = np.ones((1000, 2))
    samples = np.concatenate(
        [draw_sketch(spec, a, rng).matrix.ravel() for _ in range(200)]
    )
    assert samples.size == 1_000_000
    assert abs(samples.mean()) <= 0.01
    assert abs(samples.var() - 1.0) <= 0.02


# --- finite collection -------------------------------------------------------


def test_collection_regeneration_deterministic():
    first = collection_matrix(123, 7, 20, 3)
    second = collection_matrix(123, 7, 20, 3)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, collection_matrix(123, 8, 20, 3))
    assert not np.array_equal(first, collection_matrix(124, 7, 20, 3))


def test_collection_batch_matches_singles():
    batch = collection_members(9, 4, 6, 11, 3)
    singles = np.stack([collection_matrix(9, 4 + i, 11, 3) for i in range(6)])
    assert np.array_equal(batch, singles)


def test_collection_member_moments():
    vals = collection_members(2, 0, 3000, 20, 5).ravel()
    assert abs(vals.mean()) <= 0.01
    assert abs(vals.var() - 1.0) <= 0.02


def test_finite_collection_draw_uses_collection():
    spec = SketchSpec(SketchKind.FINITE_GAUSSIAN_COLLECTION, block_size=2, collection_size=3, seed=5)
    a = np.ones((6, 2))
    rng = np.random.default_rng(0)
    draw = draw_sketch(spec, a, rng)
    assert 0 <= draw.draw_index < 3
    assert np.array_equal(draw.matrix, collection_matrix(5, draw.draw_index, 6, 2))


# --- sketched systems --------------------------------------------------------


def test_row_extraction():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([5.0, 6.0])
    a_s, b_s = sketched_system(SketchDraw(draw_index=0, row_indices=np.array([0])), a, b)
    assert np.array_equal(a_s, [[1.0, 2.0]])
    assert np.array_equal(b_s, [5.0])


def test_basis_vector_sketch_equals_row_extraction():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([5.0, 6.0])
    basis = np.array([[1.0], [0.0]])
    a_s, b_s = sketched_system(SketchDraw(draw_index=0, matrix=basis), a, b)
    assert np.array_equal(a_s, [[1.0, 2.0]])
    assert np.array_equal(b_s, [5.0])


def test_explicit_sketch_matches_triple_loop_oracle():
    rng = np.random.default_rng(2)
    s = rng.standard_normal((3, 2))
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal(3)
    a_s, _ = sketched_system(SketchDraw(draw_index=0, matrix=s), a, b)
    assert np.allclose(a_s, triple_loop_matmul(s, a), atol=1e-12)


def test_explicit_sketch_matrix_for_rows():
    draw = SketchDraw(draw_index=1, row_indices=np.array([2, 3]))
    sk = explicit_sketch_matrix(draw, 5)
    assert sk.shape == (5, 2)
    assert np.array_equal(sk.T @ np.arange(5.0), [2.0, 3.0])


def test_draw_requires_exactly_one_payload():
    with pytest.raises(Exception):
        SketchDraw(draw_index=0)


def test_second_moment_identity_through_draws():
    # E ||S^T A u||^2 = s ||A u||^2 over fresh Gaussian block draws
    rng = np.random.default_rng(21)
    a = rng.standard_normal((20, 8))
    u = rng.standard_normal(8)
    u /= np.linalg.norm(u)
    wn = float(np.linalg.norm(a @ u) ** 2)
    spec = SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=4)
    b = np.zeros(20)
    total = 0.0
    trials = 10_000
    for _ in range(trials):
        a_s, _ = sketched_system(draw_sketch(spec, a, rng), a, b)
        v = a_s @ u
        total += float(v @ v)
    ratio = total / (trials * 4 * wn)
    assert 0.95 <= ratio <= 1.05


# --- cardinality bounds ------------------------------------------------------


def test_cardinality_bounds_frozen_values():
    # direct evaluation of ceil(64 c m^2 ln m) and floor(e^{m/3})
    b = collection_cardinality_bounds(20, 4.0)
    assert b == (306_763, 785, False)
    b = collection_cardinality_bounds(60, 3.1)
    assert b.n_min == 2_924_345
    assert b.n_max == 485_165_195
    assert b.feasible


def test_cardinality_bounds_small_m_infeasible():
    assert not collection_cardinality_bounds(2, 4.0).feasible


def test_cardinality_bounds_rejects_small_c():
    with pytest.raises(ParameterError):
        collection_cardinality_bounds(20, 3.0)
    with pytest.raises(ParameterError):
        collection_cardinality_bounds(1, 4.0)


def test_cardinality_bounds_huge_m_no_overflow():
    b = collection_cardinality_bounds(50_000, 4.0)
    assert b.feasible and math.isinf(b.n_max)


# --- quality validation ------------------------------------------------------


def _finite_spec(n, s=2, seed=0):
    return SketchSpec(SketchKind.FINITE_GAUSSIAN_COLLECTION, block_size=s, collection_size=n, seed=seed)


def test_all_zero_member_fails_second_moment_condition():
    rep = validate_good_collection(_finite_spec(1), m=4, matrix_source=lambda k: np.zeros((4, 2)))
    assert not rep.cond3_ok
    assert rep.worst_diag_dev == pytest.approx(1.0)


def test_large_entry_fails_opnorm_condition():
    member = np.zeros((4, 2))
    member[0, 0] = 100.0
    rep = validate_good_collection(_finite_spec(1), m=4, matrix_source=lambda k: member)
    assert not rep.cond1_ok
    assert rep.max_opnorm >= 100.0


def test_gaussian_collection_passes_at_moderate_scale():
    m = 8
    n = math.ceil(64 * 4 * m * m * math.log(m))
    rep = validate_good_collection(_finite_spec(n, s=2, seed=31), m=m)
    assert rep.all_ok
    assert rep.recompute() == (rep.cond1_ok, rep.cond2_ok, rep.cond3_ok)


def test_validation_independent_of_batch_partitioning():
    spec = _finite_spec(500, s=2, seed=3)
    a = validate_good_collection(spec, m=6, batch_size=7)
    b = validate_good_collection(spec, m=6, batch_size=4096)
    # decisions identical; accumulated statistics equal up to summation order
    assert (a.cond1_ok, a.cond2_ok, a.cond3_ok) == (b.cond1_ok, b.cond2_ok, b.cond3_ok)
    assert a.max_opnorm == pytest.approx(b.max_opnorm, rel=1e-12)
    assert a.worst_cross_sum == pytest.approx(b.worst_cross_sum, rel=1e-10)
    assert a.worst_diag_dev == pytest.approx(b.worst_diag_dev, rel=1e-10)


def test_validation_memory_cap():
    with pytest.raises(ResourceLimitError, match="cap"):
        validate_good_collection(_finite_spec(10, s=4), m=100, memory_cap_bytes=1000)


def test_validation_requires_finite_kind():
    with pytest.raises(ParameterError):
        validate_good_collection(SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=2), m=4)
