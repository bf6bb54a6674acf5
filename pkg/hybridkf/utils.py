from __future__ import annotations

__all__ = ["machine_descriptor", "parse_range", "run_stream", "stable_hash", "version_string"]

import hashlib
import logging
import platform
import subprocess
from pathlib import Path

import numpy as np

from hybridkf import __version__

LOGGER = logging.getLogger(__name__)


def stable_hash(*arrays: np.ndarray) -> str:
    """SHA-256 over the float64 bytes of each array, in order."""
    digest = hashlib.sha256()
    for array in arrays:
        value = np.ascontiguousarray(array, dtype=np.float64)
        digest.update(str(value.shape).encode("utf-8"))
        digest.update(value.tobytes())
    return digest.hexdigest()


def run_stream(seed: int, run: int, stream: int) -> np.random.Generator:
    """Generator of one stream of one Monte-Carlo run, keyed by (seed, run, stream)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, stream)))


def parse_range(value: str) -> list[int]:
    """Parse `a:b` or `a:b:step` (both ends inclusive), `a-b`, a comma list or a single int."""
    value = value.strip()
    try:
        if ":" in value:
            parts = [int(x) for x in value.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            start, stop, *rest = parts
            step = rest[0] if rest else 1
            if step <= 0:
                raise ValueError
            return list(range(start, stop + 1, step))
        if "," in value:
            return [int(x) for x in value.split(",") if x.strip()]
        if "-" in value.lstrip("-"):
            start, stop = (int(x) for x in value.split("-", 1))
            return list(range(start, stop + 1))
        return [int(value)] if value else []
    except ValueError:
        raise ValueError(f"`{value}` isn't a valid range") from None


def machine_descriptor() -> str:
    return (
        f"{platform.system()} {platform.release()} {platform.machine()}, "
        f"{platform.python_implementation()} {platform.python_version()}, numpy {np.__version__}"
    )


def version_string() -> str:
    """`git describe` of the source tree when available, else the package version."""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],  # noqa: S607
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = result.stdout.strip()
    return f"{__version__}+{described}" if described else __version__
