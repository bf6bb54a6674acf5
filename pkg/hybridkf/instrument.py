from __future__ import annotations

__all__ = ["CallCounts", "count_calls", "record"]

from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, fields

_ACTIVE: ContextVar[CallCounts | None] = ContextVar("hybridkf_call_counts", default=None)


@dataclass
class CallCounts:
    f: int = 0
    h: int = 0
    jac_f: int = 0
    jac_h: int = 0
    cholesky: int = 0

    def per_step(self: CallCounts, steps: int) -> dict[str, float]:
        return {x.name: getattr(self, x.name) / steps for x in fields(self)}


@contextmanager
def count_calls() -> Iterator[CallCounts]:
    counts = CallCounts()
    token = _ACTIVE.set(counts)
    try:
        yield counts
    finally:
        _ACTIVE.reset(token)


def record(name: str, amount: int = 1) -> None:
    counts = _ACTIVE.get()
    if counts is not None:
        setattr(counts, name, getattr(counts, name) + amount)
