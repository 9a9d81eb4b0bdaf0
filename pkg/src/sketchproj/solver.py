"""The sketch-and-project iteration: one step projects the current iterate onto
the solution set of the sketched system, and `solve` repeats that until a
stopping rule fires, tracing relative error along the way.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NumericFailure, ParameterError
from .linalg import apply_pinv, as_matrix, as_vector
from .sketch import SketchDraw, SketchKind, SketchSpec, draw_sketch, row_weights, sketched_system

TERMINAL_REASONS = ("threshold", "max_iterations", "max_seconds")


@dataclass(frozen=True)
class StopRule:
    rel_error_threshold: float = 1e-4
    max_iterations: int = 1_000_000
    max_seconds: float = 600.0

    def __post_init__(self):
        if self.rel_error_threshold <= 0:
            raise ParameterError("rel_error_threshold must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if self.max_seconds <= 0:
            raise ParameterError("max_seconds must be positive")


class TraceRecord(NamedTuple):
    iteration: int
    elapsed_seconds: float
    rel_error: float


@dataclass
class ConvergenceTrace:
    """Per-iteration error record for one solver run.

    ``meta`` carries the clock source, which error metric was recorded (true
    relative error when the ground truth is known, else the residual
    surrogate), the count of degenerate no-op steps, and harness bookkeeping
    such as the problem-instance digest.
    """

    records: list[TraceRecord] = field(default_factory=list)
    terminal_reason: str = "threshold"
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def first_at_or_below(self, threshold: float) -> TraceRecord | None:
        """Earliest record whose error is at or below ``threshold``."""
        for rec in self.records:
            if rec.rel_error <= threshold:
                return rec
        return None


def relative_error(x, x_star) -> float:
    """Squared relative error ``||x - x*||^2 / ||x*||^2``."""
    x = as_vector(x)
    x_star = as_vector(x_star, name="x_star")
    ns = float(x_star @ x_star)
    if ns == 0.0:
        raise ParameterError("relative error undefined for a zero ground truth")
    d = x - x_star
    return float(d @ d) / ns


def _project_step(x: np.ndarray, a_s: np.ndarray, b_s: np.ndarray) -> tuple[np.ndarray, bool]:
    # An all-zero sketched matrix makes the projection vacuous: identity step.
    if not a_s.any():
        return x, True
    return x + apply_pinv(a_s, b_s - a_s @ x), False


def step(x, a, b, draw: SketchDraw) -> np.ndarray:
    """One projection onto the solution set of the sketched system."""
    a = as_matrix(a)
    b = as_vector(b)
    x = as_vector(x)
    a_s, b_s = sketched_system(draw, a, b)
    new_x, _ = _project_step(x, a_s, b_s)
    return new_x


def solve(
    a,
    b,
    x0,
    spec: SketchSpec,
    stop: StopRule | None = None,
    rng: np.random.Generator | None = None,
    *,
    x_star=None,
    record_stride: int = 1,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Iterate sketch-and-project until the stopping rule fires.

    When ``x_star`` is given the trace records the squared relative error to
    it; otherwise the squared relative residual ``||a x - b||^2 / ||b||^2`` is
    recorded and labeled as a surrogate in the trace metadata.  ``x0`` of
    ``None`` starts from the zero vector.  Iteration 0 (the initial point) is
    always recorded, as is the terminal iteration; ``record_stride`` thins the
    records in between.
    """
    a = as_matrix(a)
    b = as_vector(b)
    m, n = a.shape
    if b.shape[0] != m:
        raise ParameterError(f"b has length {b.shape[0]}, expected {m}")
    stop = StopRule() if stop is None else stop
    rng = np.random.default_rng() if rng is None else rng
    if record_stride < 1:
        raise ParameterError("record_stride must be >= 1")
    x = np.zeros(n) if x0 is None else as_vector(x0).copy()

    if x_star is not None:
        x_star = as_vector(x_star, name="x_star")
        metric_name = "rel_error"

        def metric(v):
            return relative_error(v, x_star)

    else:
        bn = float(b @ b)
        if bn == 0.0:
            raise ParameterError("residual surrogate undefined for b = 0; supply x_star")
        metric_name = "residual_surrogate"

        def metric(v):
            r = a @ v - b
            return float(r @ r) / bn

    row_probs = row_weights(a) if spec.kind is SketchKind.SINGLE_ROW_WEIGHTED else None

    clock = time.process_time
    t0 = clock()
    trace = ConvergenceTrace(
        records=[],
        terminal_reason="threshold",
        meta={"clock": "process_time", "metric": metric_name, "degenerate_steps": 0},
    )
    err = metric(x)
    trace.records.append(TraceRecord(0, 0.0, err))
    if err <= stop.rel_error_threshold:
        return x, trace

    k = 0
    while True:
        draw = draw_sketch(spec, a, rng, row_probs=row_probs)
        a_s, b_s = sketched_system(draw, a, b)
        x_new, degenerate = _project_step(x, a_s, b_s)
        k += 1
        if degenerate:
            trace.meta["degenerate_steps"] += 1
        if not np.isfinite(x_new).all():
            trace.terminal_reason = "numeric_failure"
            raise NumericFailure(f"non-finite iterate at iteration {k}", x=x, trace=trace)
        x = x_new
        err = metric(x)
        elapsed = clock() - t0
        if not np.isfinite(err):
            trace.terminal_reason = "numeric_failure"
            raise NumericFailure(f"non-finite error metric at iteration {k}", x=x, trace=trace)
        reason = None
        if err <= stop.rel_error_threshold:
            reason = "threshold"
        elif k >= stop.max_iterations:
            reason = "max_iterations"
        elif elapsed >= stop.max_seconds:
            reason = "max_seconds"
        if reason is not None or k % record_stride == 0:
            trace.records.append(TraceRecord(k, elapsed, err))
        if reason is not None:
            trace.terminal_reason = reason
            return x, trace
