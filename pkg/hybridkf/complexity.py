"""Closed-form operation counts of the UKF and the hybrid filter, in units of one basic operation.

The counts cover one predict/update cycle with j operations per evaluation of f. The UKF
count covers 2n+1 sigma points with a redraw; the hybrid count covers its single draw with
linearized covariances.
"""

from __future__ import annotations

__all__ = [
    "CostModelInput",
    "CostReport",
    "MeasuredCost",
    "measured_cost",
    "newkf_flops",
    "parse_rule",
    "reduction_ratio",
    "sweep_grid",
    "ukf_flops",
    "write_sweep_csv",
]

import csv
import logging
import math
import re
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, PositiveInt

from hybridkf.estimators import build_estimator
from hybridkf.gaussian import GaussianBelief
from hybridkf.instrument import count_calls
from hybridkf.settings import FilterKind, FilterSettings, ParticleSettings, UtSettings
from hybridkf.systems import Simulation, SystemModel

LOGGER = logging.getLogger(__name__)

CSV_HEADER = ("n", "m", "j", "ukf_flops", "newkf_flops", "reduction")

Rule = Callable[[int], int]


class CostModelInput(BaseModel, frozen=True):
    n: PositiveInt
    m: PositiveInt
    j: PositiveInt


class CostReport(BaseModel, frozen=True):
    n: int
    m: int
    j: int
    ukf_flops: int
    newkf_flops: int
    reduction: float

    @classmethod
    def evaluate(cls: type[CostReport], cost: CostModelInput) -> CostReport:
        return cls(
            n=cost.n,
            m=cost.m,
            j=cost.j,
            ukf_flops=ukf_flops(cost),
            newkf_flops=newkf_flops(cost),
            reduction=reduction_ratio(cost),
        )

    def row(self: CostReport) -> tuple[object, ...]:
        return (self.n, self.m, self.j, self.ukf_flops, self.newkf_flops, f"{self.reduction:.6f}")


def ukf_flops(cost: CostModelInput) -> int:
    n, m, j = cost.n, cost.m, cost.j
    return (
        j
        + 8 * m
        + 18 * n
        + 2 * j * n
        + 10 * m * n
        + 8 * m**2 * n
        + 10 * m**2
        + 4 * m**3
        + 28 * n**2
        + 12 * n**3
        + 4
    )


def newkf_flops(cost: CostModelInput) -> int:
    n, m, j = cost.n, cost.m, cost.j
    return j + 5 * n + 2 * j * n + m * n + m**2 + 13 * n**2 + 5 * n**3


def reduction_ratio(cost: CostModelInput) -> float:
    ukf = ukf_flops(cost)
    return (ukf - newkf_flops(cost)) / ukf


def parse_rule(text: str | int) -> Rule:
    """Turn `5`, `n`, `10n`, `10*n` or `n/2` (rounded up) into a function of n."""
    value = str(text).strip().replace(" ", "").lower()
    if re.fullmatch(r"\d+", value):
        constant = int(value)
        return lambda n: constant  # noqa: ARG005
    match = re.fullmatch(r"(\d+)?\*?n", value)
    if match:
        factor = int(match.group(1) or 1)
        return lambda n: factor * n
    match = re.fullmatch(r"(?:ceil\()?n/(\d+)\)?", value)
    if match and int(match.group(1)) > 0:
        divisor = int(match.group(1))
        return lambda n: math.ceil(n / divisor)
    raise ValueError(f"`{text}` isn't a valid rule, use k, n, kn or n/k")


def sweep_grid(
    n_range: Iterable[int], m_rule: Rule | str | int, j_rule: Rule | str | int
) -> list[CostReport]:
    n_values = list(n_range)
    if not n_values:
        raise ValueError("The n range is empty")
    m_of = m_rule if callable(m_rule) else parse_rule(m_rule)
    j_of = j_rule if callable(j_rule) else parse_rule(j_rule)
    return [
        CostReport.evaluate(CostModelInput(n=n, m=max(1, m_of(n)), j=max(1, j_of(n))))
        for n in n_values
    ]


def write_sweep_csv(reports: Sequence[CostReport], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(CSV_HEADER)
        writer.writerows(x.row() for x in reports)
    return path


@dataclass(frozen=True)
class MeasuredCost:
    kind: FilterKind
    steps: int
    median_seconds: float
    iqr_seconds: float
    total_seconds: float
    calls: dict[str, float]


def measured_cost(
    kind: FilterKind,
    model: SystemModel,
    initial: GaussianBelief,
    steps: int = 1000,
    warmup: int = 100,
    seed: int = 0,
    simulation: Simulation | None = None,
    filter_settings: FilterSettings | None = None,
    ut: UtSettings | None = None,
    particles: ParticleSettings | None = None,
) -> MeasuredCost:
    """Per-step wall time and model-call counts of one estimator, after `warmup` discarded steps.

    Without a `simulation` the measurements come from the model's own uncontrolled simulation.
    Either way they exist before timing starts. Run it serially; concurrent measurements
    distort each other.
    """
    if steps < 1 or warmup < 0:
        raise ValueError("steps must be positive and warmup non-negative")
    if simulation is None:
        simulation = model.simulate(initial.mean, warmup + steps, np.random.default_rng(seed))
    elif simulation.steps < warmup + steps:
        if simulation.steps <= warmup:
            raise ValueError(f"The simulation has {simulation.steps} steps, warmup needs more")
        LOGGER.warning(
            "Timing %s over %d steps, the simulation is shorter than requested",
            kind,
            simulation.steps - warmup,
        )
        steps = simulation.steps - warmup
    total = warmup + steps
    controls = simulation.controls
    estimator = build_estimator(
        kind, model, filter_settings=filter_settings, ut=ut, particles=particles
    )
    estimator.reset(initial, np.random.default_rng(seed + 1))

    def control(k: int) -> object:
        return None if controls is None else controls[k]

    for k in range(warmup):
        estimator.advance(control(k), simulation.measurements[k])
    durations = np.empty(steps)
    with count_calls() as counts:
        for index, k in enumerate(range(warmup, total)):
            start = time.perf_counter()
            estimator.advance(control(k), simulation.measurements[k])
            durations[index] = time.perf_counter() - start
    lower, median, upper = np.percentile(durations, [25, 50, 75])
    LOGGER.debug("%s median step %.3e s over %d steps", kind, median, steps)
    return MeasuredCost(
        kind=kind,
        steps=steps,
        median_seconds=float(median),
        iqr_seconds=float(upper - lower),
        total_seconds=float(durations.sum()),
        calls=counts.per_step(steps),
    )
