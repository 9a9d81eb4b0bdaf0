"""Command-line entry point.

Subcommands: `solve` (multi-trial experiment for one method), `sweep`
(block-size sweep), `collection` (finite-collection study), `verify`
(Monte-Carlo check suite), `bounds` (print the closed-form rate bounds).

Every flag has a `key=value` config-file equivalent (`--config FILE`); values
given on the command line override the file.  Exit codes: 0 success, 1 config
error, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from .errors import ConfigError, InputError, NumericFailure, ResourceLimitError
from .harness import (
    ExperimentConfig,
    block_size_sweep,
    config_from_mapping,
    finite_collection_study,
    parse_config_text,
    run_experiment,
)
from .linalg import spectral_summary
from .verify import run_checks, write_reports_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; route that through ConfigError
    # so usage problems report the config-error exit code.
    def error(self, message):
        raise ConfigError(message)


_CONFIG_FLAGS = [
    ("--model", "model", str, "matrix model: gaussian | coherent | mixed | csv:<path>"),
    ("--m", "m", int, "row count"),
    ("--n", "n", int, "column count"),
    ("--method", "method", str, "sketch kind (see README) for solve/sweep/bounds"),
    ("--s", "s", int, "sketch block size"),
    ("--collection-size", "collection_size", int, "finite-collection cardinality"),
    ("--noise", "noise", str, "noise kind: none | gaussian_relative | spiky"),
    ("--noise-level", "noise_level", float, "relative noise level, e.g. 0.2"),
    ("--spike-count", "spike_count", int, "number of spiky-noise coordinates"),
    ("--spike-magnitude", "spike_magnitude", float, "spiky-noise magnitude"),
    ("--orthogonalize", "orthogonalize", str, "default | true | false"),
    ("--trials", "trials", int, "independent trials per method"),
    ("--threshold", "threshold", float, "relative-error stopping threshold"),
    ("--max-iterations", "max_iterations", int, "iteration budget"),
    ("--max-seconds", "max_seconds", float, "time budget per solve (seconds)"),
    ("--seed", "master_seed", int, "master seed"),
    ("--output-dir", "output_dir", str, "directory for CSV output"),
    ("--stride", "record_stride", int, "trace recording stride"),
    ("--normalize-rows", "normalize_rows", str, "true | false (csv model row normalization)"),
    ("--workers", "workers", int, "process-pool size for (trial, method) cells"),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; CLI flags override it")
    for flag, dest, typ, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)


def _merge_fields(args: argparse.Namespace) -> dict[str, str]:
    fields: dict[str, str] = {}
    if getattr(args, "config", None):
        try:
            fields.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        except OSError:
            raise
    for _, dest, _, _ in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            fields[dest] = str(value)
    # --method/--s/--collection-size build a single-method config.
    if "method" in fields:
        token = fields.pop("method") + ":" + fields.pop("s", "1")
        if "collection_size" in fields:
            token += ":" + fields.pop("collection_size")
        fields["methods"] = token
    else:
        fields.pop("s", None)
        fields.pop("collection_size", None)
    return fields


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    return config_from_mapping(_merge_fields(args))


def _parse_sizes(text: str | None) -> list[int]:
    if not text:
        raise ConfigError("a sizes list is required (--sizes or sizes= in the config file)")
    try:
        sizes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"bad sizes value {text!r}") from None
    if not sizes:
        raise ConfigError("sizes must list at least one integer")
    return sizes


def _print_summary(summary) -> None:
    for agg in summary.methods:
        print(
            f"{agg.label}: trials={len(agg.final_rel_errors)} reached={agg.reached} "
            f"mean_iters={agg.mean_iters:.1f} mean_seconds={agg.mean_seconds:.4g} "
            f"final_rel_error_mean={agg.final_rel_error_mean:.4g}"
        )
    print(f"output: {summary.config.output_dir}")


def _cmd_solve(args) -> int:
    summary = run_experiment(_build_config(args))
    _print_summary(summary)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    fields = _merge_fields(args)
    sizes = _parse_sizes(args.sizes or fields.get("sizes"))
    config = config_from_mapping(fields)
    results = block_size_sweep(config, sizes)
    for s, summary in results:
        agg = summary.methods[0]
        print(f"s={s}: mean_iters={agg.mean_iters:.1f} mean_seconds={agg.mean_seconds:.4g}")
    print(f"output: {config.output_dir}")
    return EXIT_OK


def _cmd_collection(args) -> int:
    fields = _merge_fields(args)
    sizes = _parse_sizes(args.sizes or fields.get("sizes"))
    config = config_from_mapping(fields)
    summary = finite_collection_study(config, sizes)
    _print_summary(summary)
    return EXIT_OK


def _cmd_verify(args) -> int:
    fields = {}
    if args.config:
        fields = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
    checks = args.checks if args.checks is not None else fields.get("checks", "all")
    seed = args.seed if args.seed is not None else int(fields.get("master_seed", 0))
    output_dir = args.output_dir if args.output_dir is not None else fields.get("output_dir")
    reports = run_checks(checks, seed=seed)
    buf = io.StringIO()
    write_reports_csv(reports, buf)
    sys.stdout.write(buf.getvalue())
    if output_dir:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mc_reports.csv").write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    from .harness import _method_bounds, build_trial_problem

    config = _build_config(args)
    config.validate()
    problem = build_trial_problem(config, 0)
    summary = spectral_summary(problem.a)
    print(
        f"model={config.model} m={problem.shape[0]} n={problem.shape[1]} "
        f"sigma_min={summary.sigma_min:.6g} sigma_max={summary.sigma_max:.6g} "
        f"frob={summary.frob:.6g} kappa2={summary.kappa2:.6g}"
    )
    print("source,beta,horizon,per_step_noise,applicable,reason")
    for spec in config.methods:
        for tag, bound in _method_bounds(config, problem, spec).items():
            print(
                f"{bound.source},{bound.beta!r},{bound.horizon!r},"
                f"{'' if bound.per_step_noise is None else repr(bound.per_step_noise)},"
                f"{bound.applicable},{bound.reason}"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sketchproj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run a multi-trial experiment for one method")
    _add_config_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="block-size sweep")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--sizes", default=None, help="comma-separated block sizes, e.g. 5,25,50")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_coll = sub.add_parser("collection", help="finite-collection study")
    _add_config_flags(p_coll)
    p_coll.add_argument("--sizes", default=None, help="comma-separated collection sizes, e.g. 200,25,5")
    p_coll.set_defaults(func=_cmd_collection)

    p_verify = sub.add_parser("verify", help="run the Monte-Carlo check suite")
    p_verify.add_argument("--config", help="key=value config file (checks, master_seed, output_dir)")
    p_verify.add_argument("--checks", default=None, help="all or comma-separated check names")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--output-dir", default=None)
    p_verify.set_defaults(func=_cmd_verify)

    p_bounds = sub.add_parser("bounds", help="print closed-form rate bounds for a model")
    _add_config_flags(p_bounds)
    p_bounds.set_defaults(func=_cmd_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, ResourceLimitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
