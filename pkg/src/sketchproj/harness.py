"""Experiment runner: multi-trial solves with paired problem instances across
methods, block-size sweeps, finite-collection studies, CSV trace emission, and
trial aggregation with min/mean/max bands.

Seeding is fully deterministic: cell (trial, method) derives its seed by
hashing the master seed, the trial index, and the method's identity (never its
list position), so adding, removing, or reordering methods never perturbs the
results of the others.  Timing columns are the only output excluded from the
bit-reproducibility guarantee.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import (
    RateBound,
    horizon_finite_collection,
    horizon_fresh_gaussian,
    rate_condition_number,
    rate_finite_collection,
    rate_norm_ratio,
    rate_one_step,
)
from .errors import ConfigError
from .linalg import spectral_summary
from .models import NoiseSpec, ProblemInstance, gen_coherent, gen_gaussian, gen_mixed, load_csv_matrix, make_problem
from .sketch import SketchKind, SketchSpec
from .solver import ConvergenceTrace, StopRule, TraceRecord, solve

SUMMARY_HEADER = (
    "method,s,trials,mean_iters,min_iters,max_iters,mean_seconds,"
    "final_rel_error_mean,beta_thm1,beta_thm2,beta_thm3,horizon"
)

MODEL_GENERATORS = {"gaussian": gen_gaussian, "coherent": gen_coherent, "mixed": gen_mixed}


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the given parts (order-sensitive, process-independent)."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def method_key(spec: SketchSpec) -> str:
    """Identity of a method for seed derivation; excludes the collection seed,
    which the harness itself derives per cell."""
    return f"{spec.kind.value}:{spec.block_size}:{spec.collection_size}"


def instance_digest(problem: ProblemInstance) -> str:
    h = hashlib.blake2b(digest_size=8)
    h.update(problem.a.tobytes())
    h.update(problem.b.tobytes())
    h.update(problem.x_star.tobytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "gaussian"
    m: int = 2000
    n: int = 100
    methods: tuple[SketchSpec, ...] = (SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=50),)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    trials: int = 35
    stop: StopRule = field(default_factory=StopRule)
    master_seed: int = 0
    output_dir: str = "runs"
    record_stride: int = 1
    normalize_rows: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.model not in MODEL_GENERATORS and not self.model.startswith("csv:"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model in MODEL_GENERATORS:
            if not self.m >= self.n >= 1:
                raise ConfigError(f"need m >= n >= 1, got m={self.m}, n={self.n}")
            for spec in self.methods:
                if spec.block_size > self.m:
                    raise ConfigError(
                        f"method {spec.label}: block size {spec.block_size} exceeds m={self.m}"
                    )
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")


def method_to_token(spec: SketchSpec) -> str:
    token = f"{spec.kind.value}:{spec.block_size}"
    if spec.kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
        token += f":{spec.collection_size}:{spec.seed}"
    return token


def method_from_token(token: str) -> SketchSpec:
    parts = token.split(":")
    try:
        kind = SketchKind(parts[0])
        s = int(parts[1]) if len(parts) > 1 else 1
        if kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
            n = int(parts[2]) if len(parts) > 2 else 1
            seed = int(parts[3]) if len(parts) > 3 else 0
            return SketchSpec(kind, block_size=s, collection_size=n, seed=seed)
        if len(parts) > 2:
            raise ValueError("too many fields")
        return SketchSpec(kind, block_size=s)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad method token {token!r}: {exc}") from None


def config_to_text(config: ExperimentConfig) -> str:
    noise = config.noise
    ortho = "default" if noise.orthogonalize is None else str(noise.orthogonalize).lower()
    lines = [
        f"model={config.model}",
        f"m={config.m}",
        f"n={config.n}",
        "methods=" + ",".join(method_to_token(s) for s in config.methods),
        f"noise={noise.kind}",
        f"noise_level={float(noise.level)!r}",
        f"spike_count={noise.spike_count}",
        f"spike_magnitude={float(noise.spike_magnitude)!r}",
        f"orthogonalize={ortho}",
        f"trials={config.trials}",
        f"threshold={float(config.stop.rel_error_threshold)!r}",
        f"max_iterations={config.stop.max_iterations}",
        f"max_seconds={float(config.stop.max_seconds)!r}",
        f"master_seed={config.master_seed}",
        f"output_dir={config.output_dir}",
        f"record_stride={config.record_stride}",
        f"normalize_rows={str(config.normalize_rows).lower()}",
        f"workers={config.workers}",
    ]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    """`key=value` lines with `#` comments into a flat dict."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"config field {key}: expected boolean, got {value!r}")


# Keys config_from_mapping consumes, plus the single-method shorthand and the
# command-specific keys the CLI handles itself; anything else is a typo.
CONFIG_KEYS = frozenset(
    (
        "model", "m", "n", "methods", "noise", "noise_level", "spike_count",
        "spike_magnitude", "orthogonalize", "trials", "threshold",
        "max_iterations", "max_seconds", "master_seed", "output_dir",
        "record_stride", "normalize_rows", "workers",
    )
)
COMMAND_KEYS = frozenset(("method", "s", "collection_size", "sizes", "checks"))


def _get(fields: dict[str, str], key: str, conv, default):
    if key not in fields:
        return default
    try:
        return conv(fields[key])
    except ValueError as exc:
        raise ConfigError(f"config field {key}: {exc}") from None


def config_from_mapping(fields: dict[str, str]) -> ExperimentConfig:
    unknown = set(fields) - CONFIG_KEYS - COMMAND_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    base = ExperimentConfig()
    ortho_raw = fields.get("orthogonalize", "default")
    noise = NoiseSpec(
        kind=fields.get("noise", "none"),
        level=_get(fields, "noise_level", float, 0.0),
        spike_count=_get(fields, "spike_count", int, 0),
        spike_magnitude=_get(fields, "spike_magnitude", float, 0.0),
        orthogonalize=None if ortho_raw == "default" else _parse_bool(ortho_raw, "orthogonalize"),
    )
    stop = StopRule(
        rel_error_threshold=_get(fields, "threshold", float, base.stop.rel_error_threshold),
        max_iterations=_get(fields, "max_iterations", int, base.stop.max_iterations),
        max_seconds=_get(fields, "max_seconds", float, base.stop.max_seconds),
    )
    methods_text = fields.get("methods")
    methods = (
        tuple(method_from_token(tok) for tok in methods_text.split(",") if tok)
        if methods_text
        else base.methods
    )
    return ExperimentConfig(
        model=fields.get("model", base.model),
        m=_get(fields, "m", int, base.m),
        n=_get(fields, "n", int, base.n),
        methods=methods,
        noise=noise,
        trials=_get(fields, "trials", int, base.trials),
        stop=stop,
        master_seed=_get(fields, "master_seed", int, base.master_seed),
        output_dir=fields.get("output_dir", base.output_dir),
        record_stride=_get(fields, "record_stride", int, base.record_stride),
        normalize_rows=_parse_bool(fields.get("normalize_rows", "false"), "normalize_rows"),
        workers=_get(fields, "workers", int, base.workers),
    )


def config_from_text(text: str) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(text))


# --------------------------------------------------------------------------
# trace files


def emit_trace(trace: ConvergenceTrace, path) -> None:
    """Write a trace CSV: header, one row per record in full-precision decimal,
    and a trailing `# terminal_reason=<value>` comment."""
    lines = ["iteration,elapsed_seconds,rel_error"]
    for rec in trace.records:
        lines.append(f"{int(rec.iteration)},{float(rec.elapsed_seconds)!r},{float(rec.rel_error)!r}")
    lines.append(f"# terminal_reason={trace.terminal_reason}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_trace_csv(path) -> ConvergenceTrace:
    """Inverse of `emit_trace` (metadata other than the terminal reason is not
    persisted in trace files)."""
    text = Path(path).read_text(encoding="utf-8")
    records = []
    reason = "threshold"
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != "iteration,elapsed_seconds,rel_error":
        raise ConfigError(f"{path}: not a trace file")
    for line in lines[1:]:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("terminal_reason="):
                reason = body.split("=", 1)[1]
            continue
        it, elapsed, rel = line.split(",")
        records.append(TraceRecord(int(it), float(elapsed), float(rel)))
    return ConvergenceTrace(records=records, terminal_reason=reason)


# --------------------------------------------------------------------------
# aggregation


@dataclass
class MethodAggregate:
    """Per-method cross-trial statistics.

    Trials that never reach the threshold are censored at the iteration/time
    budget in the summary statistics; ``reached`` counts the trials that did.
    Bands are padded with each trial's final value out to the longest trace.
    """

    spec: SketchSpec
    label: str
    iters_to_threshold: list[int | None]
    seconds_to_threshold: list[float | None]
    final_rel_errors: list[float]
    band_iterations: np.ndarray
    band_mean: np.ndarray
    band_min: np.ndarray
    band_max: np.ndarray
    censor_iterations: int
    censor_seconds: list[float]

    @property
    def reached(self) -> int:
        return sum(1 for v in self.iters_to_threshold if v is not None)

    def _censored_iters(self) -> list[float]:
        return [self.censor_iterations if v is None else v for v in self.iters_to_threshold]

    def _censored_seconds(self) -> list[float]:
        return [
            self.censor_seconds[i] if v is None else v
            for i, v in enumerate(self.seconds_to_threshold)
        ]

    @property
    def mean_iters(self) -> float:
        return float(np.mean(self._censored_iters()))

    @property
    def min_iters(self) -> float:
        return float(np.min(self._censored_iters()))

    @property
    def max_iters(self) -> float:
        return float(np.max(self._censored_iters()))

    @property
    def mean_seconds(self) -> float:
        return float(np.mean(self._censored_seconds()))

    @property
    def final_rel_error_mean(self) -> float:
        return float(np.mean(self.final_rel_errors))

    @property
    def max_band_width(self) -> float:
        """Largest max-min spread of the relative error across trials."""
        return float(np.max(self.band_max - self.band_min))


@dataclass
class AggregateSummary:
    config: ExperimentConfig
    methods: list[MethodAggregate]
    bounds: dict[str, dict[str, RateBound]]
    reference_digest: str

    def method(self, label: str) -> MethodAggregate:
        for agg in self.methods:
            if agg.label == label:
                return agg
        raise KeyError(label)


def _aggregate_traces(
    spec: SketchSpec, label: str, traces: list[ConvergenceTrace], stop: StopRule
) -> MethodAggregate:
    threshold = stop.rel_error_threshold
    iters, secs, finals, curves = [], [], [], []
    for trace in traces:
        hit = trace.first_at_or_below(threshold)
        iters.append(hit.iteration if hit else None)
        secs.append(hit.elapsed_seconds if hit else None)
        finals.append(trace.final.rel_error)
        curve = np.array([rec.rel_error for rec in trace.records])
        curves.append(curve)
    longest = max(len(c) for c in curves)
    padded = np.vstack([np.pad(c, (0, longest - len(c)), mode="edge") for c in curves])
    longest_trace = max(traces, key=lambda t: len(t.records))
    band_iters = np.array([rec.iteration for rec in longest_trace.records])
    return MethodAggregate(
        spec=spec,
        label=label,
        iters_to_threshold=iters,
        seconds_to_threshold=secs,
        final_rel_errors=finals,
        band_iterations=band_iters,
        band_mean=padded.mean(axis=0),
        band_min=padded.min(axis=0),
        band_max=padded.max(axis=0),
        censor_iterations=stop.max_iterations,
        censor_seconds=[t.final.elapsed_seconds for t in traces],
    )


def truncated_bands(agg: MethodAggregate, iteration: int) -> tuple[np.ndarray, ...]:
    """View of the bands cut at `iteration`, for figure parity with protocols
    that stop every method once the fastest reaches the threshold."""
    keep = agg.band_iterations <= iteration
    return (
        agg.band_iterations[keep],
        agg.band_mean[keep],
        agg.band_min[keep],
        agg.band_max[keep],
    )


# --------------------------------------------------------------------------
# experiment driver


def build_matrix(config: ExperimentConfig, trial: int) -> tuple[np.ndarray, str]:
    if config.model.startswith("csv:"):
        path = config.model[4:]
        return load_csv_matrix(path, normalize_rows=config.normalize_rows), config.model
    gen = MODEL_GENERATORS[config.model]
    seed = derive_seed(config.master_seed, "matrix", trial)
    return gen(config.m, config.n, seed), config.model


def build_trial_problem(config: ExperimentConfig, trial: int) -> ProblemInstance:
    a, tag = build_matrix(config, trial)
    seed = derive_seed(config.master_seed, "problem", trial)
    return make_problem(a, config.noise, seed=seed, model_tag=tag)


def _cell_spec(config: ExperimentConfig, spec: SketchSpec, trial: int) -> SketchSpec:
    if spec.kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
        seed = derive_seed(config.master_seed, "collection", trial, method_key(spec))
        return replace(spec, seed=seed)
    return spec


def _method_bounds(config: ExperimentConfig, problem: ProblemInstance, spec: SketchSpec) -> dict[str, RateBound]:
    summary = spectral_summary(problem.a)
    m, n = problem.shape
    s = spec.block_size
    e_norm = float(np.linalg.norm(problem.e))
    out = {
        "thm1": rate_condition_number(summary, m, s),
        "thm2": rate_norm_ratio(summary, s),
        "thm3": rate_finite_collection(summary, m, s),
        "prop1": rate_one_step(summary, m, s),
    }
    if spec.kind is SketchKind.FINITE_GAUSSIAN_COLLECTION:
        out["horizon"] = horizon_finite_collection(summary, m, n, s, e_norm)
    elif spec.kind in (SketchKind.GAUSSIAN_BLOCK, SketchKind.GAUSSIAN_VECTOR):
        out["horizon"] = horizon_fresh_gaussian(summary, n, s, e_norm)
    return out


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def write_summary_csv(summary: AggregateSummary, path) -> None:
    lines = [SUMMARY_HEADER]
    for agg in summary.methods:
        bnds = summary.bounds[agg.label]
        beta = {
            tag: (bnds[tag].beta if tag in bnds and bnds[tag].applicable else None)
            for tag in ("thm1", "thm2", "thm3")
        }
        hz = bnds.get("horizon")
        horizon = hz.horizon if hz is not None and hz.applicable else None
        lines.append(
            ",".join(
                [
                    agg.label,
                    str(agg.spec.block_size),
                    str(len(agg.final_rel_errors)),
                    _fmt(agg.mean_iters),
                    _fmt(agg.min_iters),
                    _fmt(agg.max_iters),
                    _fmt(agg.mean_seconds),
                    _fmt(agg.final_rel_error_mean),
                    _fmt(beta["thm1"]),
                    _fmt(beta["thm2"]),
                    _fmt(beta["thm3"]),
                    _fmt(horizon),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_band_csv(agg: MethodAggregate, path) -> None:
    lines = ["iteration,mean_rel_error,min_rel_error,max_rel_error"]
    for i in range(len(agg.band_iterations)):
        lines.append(
            f"{int(agg.band_iterations[i])},{float(agg.band_mean[i])!r},"
            f"{float(agg.band_min[i])!r},{float(agg.band_max[i])!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _pool_worker_init():
    # One BLAS thread per worker: the pool owns the core-level parallelism,
    # and oversubscription stalls the small per-iteration kernels.
    import threadpoolctl

    global _WORKER_THREAD_LIMIT
    _WORKER_THREAD_LIMIT = threadpoolctl.threadpool_limits(limits=1)


def _run_cell(config_text: str, trial: int, method_index: int) -> tuple[int, int, ConvergenceTrace]:
    """One (trial, method) cell: pure function of the config and indices, so
    cells can run in any order on any worker."""
    config = config_from_text(config_text)
    problem = build_trial_problem(config, trial)
    spec = config.methods[method_index]
    cell = _cell_spec(config, spec, trial)
    rng = np.random.default_rng(derive_seed(config.master_seed, "solve", trial, method_key(spec)))
    _, trace = solve(
        problem.a,
        problem.b,
        None,
        cell,
        config.stop,
        rng,
        x_star=problem.x_star,
        record_stride=config.record_stride,
    )
    trace.meta.update(
        {"instance_digest": instance_digest(problem), "trial": trial, "method": spec.label}
    )
    return trial, method_index, trace


def run_experiment(config: ExperimentConfig, write_files: bool = True) -> AggregateSummary:
    """Run every (trial, method) cell, write per-cell traces plus per-method
    band CSVs and `summary.csv`, and return the aggregate.

    Within a trial all methods see the identical problem instance (paired
    comparison); the instance digest is recorded in every trace's metadata.
    With ``config.workers > 1`` cells run on a process pool; results are
    identical to a sequential run because every cell is seed-derived.
    """
    config.validate()
    out = Path(config.output_dir)
    if write_files:
        out.mkdir(parents=True, exist_ok=True)
    labels = [spec.label for spec in config.methods]
    if len(set(labels)) != len(labels):
        raise ConfigError("method labels collide; vary kind/size/collection parameters")
    config_text = config_to_text(config)
    cells = [(t, j) for t in range(config.trials) for j in range(len(config.methods))]
    results: dict[tuple[int, int], ConvergenceTrace] = {}
    if config.workers > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers, initializer=_pool_worker_init) as pool:
            futures = [pool.submit(_run_cell, config_text, t, j) for t, j in cells]
            for fut in futures:
                trial, j, trace = fut.result()
                results[(trial, j)] = trace
    else:
        for t, j in cells:
            trial, j, trace = _run_cell(config_text, t, j)
            results[(trial, j)] = trace
    traces: dict[str, list[ConvergenceTrace]] = {label: [] for label in labels}
    for t in range(config.trials):
        for j, spec in enumerate(config.methods):
            trace = results[(t, j)]
            traces[spec.label].append(trace)
            if write_files:
                emit_trace(trace, out / f"trace_{spec.label}_t{t:03d}.csv")
    ref_problem = build_trial_problem(config, 0)
    reference_digest = instance_digest(ref_problem)
    aggregates = [
        _aggregate_traces(spec, spec.label, traces[spec.label], config.stop)
        for spec in config.methods
    ]
    bounds = {spec.label: _method_bounds(config, ref_problem, spec) for spec in config.methods}
    summary = AggregateSummary(
        config=config, methods=aggregates, bounds=bounds, reference_digest=reference_digest
    )
    if write_files:
        for agg in aggregates:
            write_band_csv(agg, out / f"aggregate_{agg.label}.csv")
        write_summary_csv(summary, out / "summary.csv")
    return summary


def block_size_sweep(
    config: ExperimentConfig, sizes: list[int], write_files: bool = True
) -> list[tuple[int, AggregateSummary]]:
    """Re-run the first configured method at each block size; writes a
    `sweep.csv` table of size versus mean iterations/seconds to threshold."""
    base = config.methods[0]
    results = []
    for s in sizes:
        sub = replace(
            config,
            methods=(replace(base, block_size=s),),
            output_dir=str(Path(config.output_dir) / f"s{s}"),
        )
        results.append((s, run_experiment(sub, write_files=write_files)))
    if write_files:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["s,mean_iters,min_iters,max_iters,mean_seconds,final_rel_error_mean"]
        for s, summary in results:
            agg = summary.methods[0]
            lines.append(
                f"{s},{_fmt(agg.mean_iters)},{_fmt(agg.min_iters)},{_fmt(agg.max_iters)},"
                f"{_fmt(agg.mean_seconds)},{_fmt(agg.final_rel_error_mean)}"
            )
        (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return results


def finite_collection_study(
    config: ExperimentConfig, collection_sizes: list[int], write_files: bool = True
) -> AggregateSummary:
    """Fresh-draw Gaussian blocks versus finite collections of each requested
    cardinality, paired on identical instances; writes `collection.csv`."""
    s = config.methods[0].block_size
    methods = [SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=s)]
    methods += [
        SketchSpec(SketchKind.FINITE_GAUSSIAN_COLLECTION, block_size=s, collection_size=nc)
        for nc in collection_sizes
    ]
    sub = replace(config, methods=tuple(methods))
    summary = run_experiment(sub, write_files=write_files)
    if write_files:
        out = Path(config.output_dir)
        lines = ["method,N,mean_iters,reached,trials,final_rel_error_mean"]
        for agg in summary.methods:
            nc = (
                agg.spec.collection_size
                if agg.spec.kind is SketchKind.FINITE_GAUSSIAN_COLLECTION
                else ""
            )
            lines.append(
                f"{agg.label},{nc},{_fmt(agg.mean_iters)},{agg.reached},"
                f"{len(agg.final_rel_errors)},{_fmt(agg.final_rel_error_mean)}"
            )
        (out / "collection.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return summary
