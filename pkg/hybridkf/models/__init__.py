__all__ = ["ClaimCheck", "ExperimentReport", "FilterResult", "ReportMetadata", "emit_report"]

from hybridkf.models.report import (
    ClaimCheck,
    ExperimentReport,
    FilterResult,
    ReportMetadata,
    emit_report,
)
