import numpy as np
import pytest

from sketchproj.errors import NumericFailure, ParameterError
from sketchproj.models import NoiseSpec, gen_gaussian, make_problem
from sketchproj.sketch import SketchDraw, SketchKind, SketchSpec, draw_sketch, explicit_sketch_matrix
from sketchproj.solver import ConvergenceTrace, StopRule, relative_error, solve, step

ALL_KINDS = [
    SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED),
    SketchSpec(SketchKind.BLOCK_PARTITION, block_size=3),
    SketchSpec(SketchKind.GAUSSIAN_VECTOR),
    SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=3),
    SketchSpec(SketchKind.FINITE_GAUSSIAN_COLLECTION, block_size=3, collection_size=7, seed=2),
]


def small_problem(seed=0, m=30, n=6):
    return make_problem(gen_gaussian(m, n, seed=seed), NoiseSpec(), seed=seed + 100)


# --- relative_error ----------------------------------------------------------


def test_relative_error_trivials():
    x_star = np.array([3.0, 4.0])
    assert relative_error(x_star, x_star) == 0.0
    assert relative_error(np.zeros(2), x_star) == pytest.approx(1.0)
    # ||2x* - x*||^2 / ||x*||^2 = 1, computed by hand for x* = (3, 4)
    assert relative_error(2 * x_star, x_star) == pytest.approx(1.0)


def test_relative_error_zero_ground_truth():
    with pytest.raises(ParameterError):
        relative_error(np.ones(2), np.zeros(2))


# --- step --------------------------------------------------------------------


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s.kind.value)
def test_solution_is_fixed_point(spec):
    prob = small_problem()
    rng = np.random.default_rng(5)
    draw = draw_sketch(spec, prob.a, rng)
    out = step(prob.x_star, prob.a, prob.b, draw)
    assert np.allclose(out, prob.x_star, atol=1e-10)


def test_single_row_projection_hand_example():
    # projecting x0 = 0 onto the solution set of row 0 (x1 = 1) lands at (1, 0)
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0, 3.0])
    draw = SketchDraw(draw_index=0, row_indices=np.array([0]))
    assert np.allclose(step(np.zeros(2), a, b, draw), [1.0, 0.0])


def test_full_size_gaussian_sketch_solves_in_one_step():
    prob = small_problem(m=40, n=8)
    draw = draw_sketch(SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=8), prob.a, np.random.default_rng(3))
    x1 = step(np.zeros(8), prob.a, prob.b, draw)
    assert relative_error(x1, prob.x_star) <= 1e-10


def test_zero_sketched_matrix_is_identity_step():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([0.0, 2.0])
    draw = SketchDraw(draw_index=0, row_indices=np.array([0]))
    x = np.array([0.7, -0.2])
    assert np.array_equal(step(x, a, b, draw), x)


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s.kind.value)
def test_step_never_expands_error(spec):
    # the update is an orthogonal projection of the error
    prob = small_problem(seed=2)
    rng = np.random.default_rng(11)
    x = rng.standard_normal(prob.shape[1])
    before = np.linalg.norm(x - prob.x_star)
    for _ in range(25):
        draw = draw_sketch(spec, prob.a, rng)
        x = step(x, prob.a, prob.b, draw)
        after = np.linalg.norm(x - prob.x_star)
        assert after <= before + 1e-10
        before = after


def test_row_draw_equals_explicit_sketch_representation():
    prob = small_problem(seed=4)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(prob.shape[1])
    for spec in ALL_KINDS[:2]:
        draw = draw_sketch(spec, prob.a, rng)
        explicit = SketchDraw(draw_index=draw.draw_index, matrix=explicit_sketch_matrix(draw, prob.shape[0]))
        by_rows = step(x, prob.a, prob.b, draw)
        by_matrix = step(x, prob.a, prob.b, explicit)
        assert np.allclose(by_rows, by_matrix, atol=1e-12)


def test_iterates_stay_in_rowspace_offset():
    # rank-deficient system: the row space is a strict subspace, so the
    # invariant is non-vacuous
    rng0 = np.random.default_rng(7)
    a = rng0.standard_normal((20, 3)) @ rng0.standard_normal((3, 5))
    x_gen = rng0.standard_normal(5)
    b = a @ x_gen
    basis = np.linalg.svd(a)[2][:3]
    x0 = np.zeros(5)
    for spec in ALL_KINDS:
        rng = np.random.default_rng(13)
        x, _ = solve(a, b, x0, spec, StopRule(max_iterations=15, rel_error_threshold=1e-30),
                     rng, x_star=x_gen)
        disp = x - x0
        recon = basis.T @ (basis @ disp)
        assert np.allclose(disp, recon, atol=1e-8)


# --- solve -------------------------------------------------------------------


def test_already_converged_terminates_at_iteration_zero():
    prob = small_problem(seed=9)
    x, trace = solve(prob.a, prob.b, prob.x_star, ALL_KINDS[3], StopRule(), np.random.default_rng(0),
                     x_star=prob.x_star)
    assert trace.terminal_reason == "threshold"
    assert trace.records == [(0, 0.0, 0.0)]
    assert np.array_equal(x, prob.x_star)


def test_full_block_converges_in_one_iteration():
    prob = make_problem(gen_gaussian(5000, 500, seed=0), NoiseSpec(), seed=1)
    spec = SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=500)
    x, trace = solve(prob.a, prob.b, None, spec, StopRule(rel_error_threshold=1e-10),
                     np.random.default_rng(2), x_star=prob.x_star)
    assert trace.terminal_reason == "threshold"
    assert trace.final.iteration == 1


def test_many_runs_all_reach_threshold():
    prob = make_problem(gen_gaussian(1000, 50, seed=3), NoiseSpec(), seed=4)
    spec = SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=10)
    stop = StopRule(rel_error_threshold=1e-4, max_iterations=100_000)
    for run in range(200):
        _, trace = solve(prob.a, prob.b, None, spec, stop, np.random.default_rng(run), x_star=prob.x_star)
        assert trace.terminal_reason == "threshold"


def test_max_iterations_reason():
    prob = small_problem(seed=12)
    spec = SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED)
    _, trace = solve(prob.a, prob.b, None, spec, StopRule(rel_error_threshold=1e-30, max_iterations=5),
                     np.random.default_rng(1), x_star=prob.x_star)
    assert trace.terminal_reason == "max_iterations"
    assert trace.final.iteration == 5


def test_trace_invariants():
    prob = small_problem(seed=13)
    _, trace = solve(prob.a, prob.b, None, ALL_KINDS[1], StopRule(rel_error_threshold=1e-6, max_iterations=400),
                     np.random.default_rng(5), x_star=prob.x_star)
    its = [r.iteration for r in trace.records]
    assert its == sorted(its) and len(set(its)) == len(its) and its[0] == 0
    elapsed = [r.elapsed_seconds for r in trace.records]
    assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))
    errs = [r.rel_error for r in trace.records]
    assert all(np.isfinite(e) and e >= 0 for e in errs)
    if trace.terminal_reason == "threshold":
        assert errs[-1] <= 1e-6
        assert all(e > 1e-6 for e in errs[:-1])


def test_record_stride_keeps_first_and_final():
    prob = small_problem(seed=14)
    _, trace = solve(prob.a, prob.b, None, ALL_KINDS[3], StopRule(rel_error_threshold=1e-8, max_iterations=500),
                     np.random.default_rng(3), x_star=prob.x_star, record_stride=7)
    its = [r.iteration for r in trace.records]
    assert its[0] == 0
    assert all(i % 7 == 0 for i in its[1:-1])
    assert trace.final.rel_error <= 1e-8 or trace.final.iteration == 500


def test_residual_surrogate_when_no_ground_truth():
    prob = small_problem(seed=15)
    _, trace = solve(prob.a, prob.b, None, ALL_KINDS[3], StopRule(rel_error_threshold=1e-8, max_iterations=200),
                     np.random.default_rng(4))
    assert trace.meta["metric"] == "residual_surrogate"
    assert trace.terminal_reason == "threshold"


def test_numeric_failure_carries_last_finite_state():
    # tiny pivot makes the projection overflow once its row is drawn
    a = np.array([[1e-200, 0.0], [0.0, 1.0]])
    b = np.array([1e200, 1.0])
    spec = SketchSpec(SketchKind.BLOCK_PARTITION, block_size=1)
    with np.errstate(all="ignore"), pytest.raises(NumericFailure) as exc_info:
        solve(a, b, None, spec, StopRule(max_iterations=50), np.random.default_rng(0),
              x_star=np.array([1.0, 1.0]))
    err = exc_info.value
    assert err.x is not None and np.isfinite(err.x).all()
    assert isinstance(err.trace, ConvergenceTrace)
    assert err.trace.terminal_reason == "numeric_failure"


def test_degenerate_steps_counted():
    # x* off the reachable set keeps the run alive long enough to draw the
    # zero row repeatedly
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([0.0, 2.0])
    spec = SketchSpec(SketchKind.BLOCK_PARTITION, block_size=1)
    _, trace = solve(a, b, None, spec, StopRule(rel_error_threshold=1e-12, max_iterations=60),
                     np.random.default_rng(8), x_star=np.array([1.5, 0.5]))
    assert trace.terminal_reason == "max_iterations"
    assert trace.meta["degenerate_steps"] >= 1


def test_stop_rule_validation():
    with pytest.raises(ParameterError):
        StopRule(rel_error_threshold=0.0)
    with pytest.raises(ParameterError):
        StopRule(max_iterations=0)
    with pytest.raises(ParameterError):
        StopRule(max_seconds=0.0)
