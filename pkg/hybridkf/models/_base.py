from __future__ import annotations

__all__ = ["FileModel", "ReportModel"]

import math
from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel


class ReportModel(
    BaseModel, populate_by_name=True, str_strip_whitespace=True, validate_assignment=True
):
    def clean_contents(self: ReportModel, content: dict[str, Any]) -> dict[str, Any]:
        """JSON-safe copy: enums become their value and non-finite floats become None."""
        cleaned_content = {}
        for key, value in content.items():
            if isinstance(key, Enum):
                key = str(key)  # noqa: PLW2901
            cleaned_content[key] = self._clean_value(value)
        return cleaned_content

    def _clean_value(self: ReportModel, value: object) -> object:
        if isinstance(value, Enum):
            return str(value)
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return self.clean_contents(value)
        if isinstance(value, (list, tuple)):
            return [self._clean_value(x) for x in value]
        return value


class FileModel(ABC):
    @classmethod
    @abstractmethod
    def from_bytes(cls: type[FileModel], content: bytes) -> FileModel: ...

    @classmethod
    def from_file(cls: type[FileModel], file: Path) -> FileModel:
        with file.open("rb") as stream:
            return cls.from_bytes(content=stream.read())

    @abstractmethod
    def to_file(self: FileModel, file: Path) -> None: ...
