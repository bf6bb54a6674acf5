from __future__ import annotations

import logging
import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path
from platform import python_version
from typing import Any

from pydantic import ValidationError

from hybridkf import __version__, get_data_dir, setup_logging
from hybridkf.console import CONSOLE, create_table
from hybridkf.exceptions import ConfigError, ScenarioError
from hybridkf.experiments import run_benchmark, run_cost_sweep, trace_run, write_trace
from hybridkf.models import ClaimCheck, ExperimentReport, emit_report
from hybridkf.settings import (
    Benchmark,
    ExperimentConfig,
    FilterKind,
    ReportFormat,
    SettingsModel,
    list_scenarios,
)
from hybridkf.utils import parse_range

LOGGER = logging.getLogger("hybridkf")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_FAILURES = 4
FAILURE_LIMIT = 0.01
KALMAN_ONLY = [FilterKind.EKF, FilterKind.UKF, FilterKind.NEWKF]


def parse_filters(value: str) -> list[FilterKind]:
    return [FilterKind.load(x.strip()) for x in value.split(",") if x.strip()]


def _add_experiment_arguments(parser: ArgumentParser) -> None:
    parser.add_argument("--benchmark", type=Benchmark.load, help="a or b")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="Experiment TOML file")
    source.add_argument("--scenario", help=f"Shipped scenario: {', '.join(list_scenarios())}")
    parser.add_argument("--filters", type=parse_filters, help="Comma separated filter kinds")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, help="Parallel processes, -1 for all cores")


def parse_arguments(argv: list[str] | None = None) -> Namespace:
    parser = ArgumentParser(prog="bench", allow_abbrev=False)
    parser.version = __version__
    parser.add_argument("--version", action="version")
    parser.add_argument("--debug", action="store_true")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a Monte-Carlo benchmark")
    _add_experiment_arguments(run)
    run.add_argument("--runs", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--format", type=ReportFormat.load, help="csv, json or md")
    run.add_argument(
        "--no-timing", action="store_true", help="Skip the timing phase and the timing columns"
    )

    sweep = subparsers.add_parser("sweep", help="Closed-form cost sweep")
    sweep.add_argument("--n", required=True, help="Range like 1:200, 1-200, 1:200:5 or 50,100")
    sweep.add_argument("--m", default="n/2", help="Rule for m: k, n, kn or n/k")
    sweep.add_argument("--j", default="10n", help="Rule for j: k, n, kn or n/k")
    sweep.add_argument("--out", type=Path)

    trace = subparsers.add_parser("trace", help="Per-step traces of a single run")
    _add_experiment_arguments(trace)
    trace.add_argument("--run-index", type=int, default=0)
    trace.add_argument("--out", type=Path)

    config = subparsers.add_parser("config", help="Show the experiment configuration")
    config.add_argument("--defaults", action="store_true")
    config.add_argument("--config", type=Path)
    return parser.parse_args(argv)


def build_config(args: Namespace) -> ExperimentConfig:
    if getattr(args, "scenario", None):
        config = ExperimentConfig.load_scenario(args.scenario)
    elif getattr(args, "config", None):
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig.load()
    content: dict[str, Any] = config.model_dump(by_alias=True)
    if getattr(args, "benchmark", None):
        content["benchmark"] = args.benchmark
        if args.benchmark == Benchmark.B and not args.filters and not args.scenario:
            content["filters"] = [x for x in config.filters if x in KALMAN_ONLY] or KALMAN_ONLY
    for key, name in (("filters", "filters"), ("seed", "seed"), ("workers", "workers")):
        if getattr(args, name, None) is not None:
            content[key] = getattr(args, name)
    if getattr(args, "runs", None) is not None:
        content["mc_runs"] = args.runs
    if getattr(args, "out", None) is not None and args.command == "run":
        content["output"]["path"] = args.out
    if getattr(args, "format", None) is not None:
        content["output"]["format"] = args.format
    if getattr(args, "no_timing", False):
        content["measure_timing"] = False
        content["output"]["include_timing"] = False
    try:
        return ExperimentConfig.model_validate(content)
    except ValidationError as err:
        raise ConfigError(f"Invalid experiment settings:\n{err}") from err


def show_report(report: ExperimentReport) -> None:
    is_b = report.metadata.benchmark == Benchmark.B
    columns = ["Filter", "Runs", "Failures", "Air-gap MSE" if is_b else "MSE", "SE"]
    if is_b:
        columns.append("Parameter MSE")
    columns.extend(["Median step (s)", "Total (s)"])

    def number(value: float | None, fmt: str = ".4g") -> str:
        return "-" if value is None else format(value, fmt)

    rows = []
    for result in report.results:
        row = [
            str(result.filter),
            result.runs,
            result.failures,
            number(result.mean_mse),
            number(result.mse_standard_error, ".2g"),
        ]
        if is_b:
            row.append(number(result.parameter_mse))
        row.extend([number(result.median_step_seconds, ".3e"), number(result.total_seconds, ".3f")])
        rows.append(row)
    CONSOLE.print(
        create_table(
            columns,
            rows,
            title=f"Benchmark {report.metadata.benchmark}",
            caption=f"seed {report.metadata.seed}, config {report.metadata.config_hash[:12]}",
        )
    )
    show_claims(report.claims)


def show_claims(claims: list[ClaimCheck]) -> None:
    if not claims:
        return
    rows = [
        (
            x.name,
            x.expected,
            x.observed,
            "[claim.holds]holds[/]" if x.holds else "[claim.fails]fails[/]",
        )
        for x in claims
    ]
    CONSOLE.print(create_table(["Claim", "Expected", "Observed", "Result"], rows, title="Claims"))


def run_command(args: Namespace) -> int:
    config = build_config(args)
    if args.debug:
        CONSOLE.print(f"Config: {config}")
    report = run_benchmark(config)
    show_report(report)
    output = config.output
    if output.path:
        emit_report(report, output.format, output.path, include_timing=output.include_timing)
        if output.trace_run is not None:
            trace_path = output.path.with_name(f"{output.path.stem}-trace.csv")
            write_trace(trace_run(config, output.trace_run), trace_path)
            LOGGER.info("Wrote trace of run %d to %s", output.trace_run, trace_path)
    if report.failure_share > FAILURE_LIMIT:
        LOGGER.error("%.1f%% of the filter runs failed", 100 * report.failure_share)
        return EXIT_FAILURES
    return EXIT_OK


def sweep_command(args: Namespace) -> int:
    try:
        n_range = parse_range(args.n)
        reports, claims = run_cost_sweep(n_range, args.m, args.j, path=args.out)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    preview = reports if len(reports) <= 20 else [*reports[:10], *reports[-10:]]
    CONSOLE.print(
        create_table(
            ["n", "m", "j", "UKF flops", "NewKF flops", "Reduction"],
            [(x.n, x.m, x.j, x.ukf_flops, x.newkf_flops, f"{x.reduction:.3f}") for x in preview],
            title="Cost sweep",
            caption=f"{len(reports)} rows" + (f", written to {args.out}" if args.out else ""),
        )
    )
    show_claims(claims)
    return EXIT_OK


def trace_command(args: Namespace) -> int:
    config = build_config(args)
    path = args.out or get_data_dir() / f"trace-{config.benchmark}-{args.run_index}.csv"
    try:
        rows = trace_run(config, args.run_index)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    write_trace(rows, path)
    LOGGER.info("Wrote %d trace rows to %s", len(rows), path)
    return EXIT_OK


def config_command(args: Namespace) -> int:
    if args.defaults:
        config = ExperimentConfig()
    elif args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig.load()
    CONSOLE.print(config.dumps(), markup=False, highlight=False)
    rows = []
    for section, value in ExperimentConfig.model_fields.items():
        annotation = value.annotation
        if isinstance(annotation, type) and issubclass(annotation, SettingsModel):
            for key, entry in annotation.model_fields.items():
                rows.append((f"{section}.{entry.alias or key}", entry.description or ""))
        else:
            rows.append((section, value.description or ""))
    CONSOLE.print(create_table(["Key", "Description"], rows, title="Experiment settings"))
    return EXIT_OK


COMMANDS = {
    "run": run_command,
    "sweep": sweep_command,
    "trace": trace_command,
    "config": config_command,
}


def main(argv: list[str] | None = None) -> int:
    try:
        CONSOLE.print(f"hybridkf v{__version__}")
        CONSOLE.print(f"Python v{python_version()}")

        args = parse_arguments(argv)
        if args.debug:
            CONSOLE.print(f"Args: {args}")
        setup_logging(debug=args.debug)
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError) as err:
        LOGGER.error("%s", err)  # noqa: TRY400
        return EXIT_CONFIG
    except ScenarioError as err:
        LOGGER.error("%s", err)  # noqa: TRY400
        return EXIT_SCENARIO
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
