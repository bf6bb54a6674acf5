from __future__ import annotations

__all__ = ["ClaimCheck", "ExperimentReport", "FilterResult", "ReportMetadata", "emit_report"]

import csv
import io
import json
import logging
from pathlib import Path

from pydantic import Field

from hybridkf.exceptions import ConfigError
from hybridkf.models._base import FileModel, ReportModel
from hybridkf.settings import Benchmark, FilterKind, JacobianMode, ReportFormat

LOGGER = logging.getLogger(__name__)

TIMING_FIELDS = ("median_step_seconds", "total_seconds")
PARAMETER_FIELDS = ("parameter_mse", "parameter_mse_standard_error", "final_parameter_error")


class ClaimCheck(ReportModel):
    name: str
    expected: str
    observed: str
    holds: bool


class FilterResult(ReportModel):
    filter: FilterKind
    runs: int
    failures: int = 0
    failure_reasons: dict[str, int] = Field(default_factory=dict)
    mean_mse: float | None = None
    mse_standard_error: float | None = None
    parameter_mse: float | None = None
    parameter_mse_standard_error: float | None = None
    final_parameter_error: float | None = None
    median_step_seconds: float | None = None
    step_seconds_iqr: float | None = None
    total_seconds: float | None = None
    calls_per_step: dict[str, float] = Field(default_factory=dict)


class ReportMetadata(ReportModel):
    benchmark: Benchmark
    seed: int
    mc_runs: int
    steps: int
    config_hash: str
    measurement_hash: str
    jacobian_mode: JacobianMode
    constants: dict[str, float] = Field(default_factory=dict)
    initial_parameter_error: float | None = None
    version: str
    machine: str


class ExperimentReport(ReportModel, FileModel):
    metadata: ReportMetadata
    results: list[FilterResult]
    claims: list[ClaimCheck] = Field(default_factory=list)

    @property
    def failure_share(self: ExperimentReport) -> float:
        runs = sum(x.runs for x in self.results)
        return sum(x.failures for x in self.results) / runs if runs else 0.0

    def result(self: ExperimentReport, kind: FilterKind) -> FilterResult | None:
        return next((x for x in self.results if x.filter == kind), None)

    @classmethod
    def from_bytes(cls: type[ExperimentReport], content: bytes) -> ExperimentReport:
        return cls.model_validate(json.loads(content.decode("utf-8")))

    def to_file(self: ExperimentReport, file: Path) -> None:
        with file.open("w", encoding="utf-8") as stream:
            stream.write(self.to_json())

    def to_json(self: ExperimentReport) -> str:
        content = self.clean_contents(self.model_dump(mode="python"))
        return json.dumps(content, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def _columns(self: ExperimentReport, include_timing: bool) -> list[str]:
        columns = ["filter", "runs", "failures", "mean_mse", "mse_standard_error"]
        if self.metadata.benchmark == Benchmark.B:
            columns.extend(PARAMETER_FIELDS)
        if include_timing:
            columns.extend(TIMING_FIELDS)
        return columns

    def to_csv(self: ExperimentReport, include_timing: bool = True) -> str:
        columns = self._columns(include_timing=include_timing)
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(columns)
        for result in self.results:
            writer.writerow(_csv_value(getattr(result, x)) for x in columns)
        return buffer.getvalue()

    def to_markdown(self: ExperimentReport, include_timing: bool = True) -> str:
        is_b = self.metadata.benchmark == Benchmark.B
        header = ["Filter"]
        if include_timing:
            header.append("Execution Time (s)")
        header.append("Air-gap MSE" if is_b else "MSE")
        if is_b:
            header.append("Parameter MSE")
        rows = []
        for result in self.results:
            row = [str(result.filter)]
            if include_timing:
                row.append(_number(result.total_seconds, ".4f"))
            row.append(_number(result.mean_mse, ".4g"))
            if is_b:
                row.append(_number(result.parameter_mse, ".4g"))
            rows.append(row)
        widths = [max(len(x[i]) for x in [header, *rows]) for i in range(len(header))]

        def render(cells: list[str]) -> str:
            padded = [
                cell.ljust(width) if index == 0 else cell.rjust(width)
                for index, (cell, width) in enumerate(zip(cells, widths))
            ]
            return "| " + " | ".join(padded) + " |"

        rule = "|" + "|".join(
            ":" + "-" * (width + 1) if index == 0 else "-" * (width + 1) + ":"
            for index, width in enumerate(widths)
        ) + "|"
        return "\n".join([render(header), rule, *(render(x) for x in rows)]) + "\n"


def _csv_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _number(value: float | None, fmt: str) -> str:
    return "n/a" if value is None else format(value, fmt)


def emit_report(
    report: ExperimentReport,
    format: ReportFormat,  # noqa: A002
    path: Path,
    include_timing: bool = True,
) -> Path:
    if format == ReportFormat.JSON:
        content = report.to_json()
    elif format == ReportFormat.MARKDOWN:
        content = report.to_markdown(include_timing=include_timing)
    else:
        content = report.to_csv(include_timing=include_timing)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as stream:
            stream.write(content)
    except OSError as err:
        raise ConfigError(f"Unable to write the report to {path}: {err}") from err
    LOGGER.info("Wrote %s report to %s", format, path)
    return path
