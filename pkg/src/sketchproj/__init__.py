"""Sketch-and-project Kaczmarz solvers with closed-form rate bounds and a
Monte-Carlo verification harness."""

from .bounds import (
    RateBound,
    horizon_finite_collection,
    horizon_fresh_gaussian,
    predicted_iterations,
    rate_condition_number,
    rate_finite_collection,
    rate_norm_ratio,
    rate_one_step,
)
from .errors import (
    ConfigError,
    CsvParseError,
    DegenerateInputError,
    InputError,
    NumericFailure,
    ParameterError,
    ResourceLimitError,
    SketchProjError,
)
from .harness import (
    AggregateSummary,
    ExperimentConfig,
    block_size_sweep,
    config_from_text,
    config_to_text,
    derive_seed,
    emit_trace,
    finite_collection_study,
    parse_trace_csv,
    run_experiment,
)
from .linalg import SpectralSummary, apply_pinv, as_matrix, as_vector, spectral_summary
from .models import (
    NoiseSpec,
    ProblemInstance,
    gen_coherent,
    gen_gaussian,
    gen_mixed,
    load_csv_matrix,
    make_problem,
)
from .sketch import (
    GoodCollectionReport,
    SketchDraw,
    SketchKind,
    SketchSpec,
    collection_cardinality_bounds,
    collection_matrix,
    draw_sketch,
    sketched_system,
    validate_good_collection,
)
from .solver import ConvergenceTrace, StopRule, TraceRecord, relative_error, solve, step
from .verify import MCReport, run_checks

__version__ = "0.1.0"
