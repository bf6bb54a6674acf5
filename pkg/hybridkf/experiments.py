"""Seeded Monte-Carlo benchmarks, the cost sweep and the checks of the published claims.

Every run derives its generators from (seed, run, stream): stream 0 draws the truth and the
measurements, stream 1 + the filter's position in `FilterKind` feeds that filter. Results are
therefore independent of the worker count and of which other filters are configured.
"""

from __future__ import annotations

__all__ = [
    "FilterRun",
    "MaglevTruth",
    "RunOutcome",
    "TraceRow",
    "Trajectory",
    "benchmark_a_claims",
    "benchmark_b_claims",
    "initial_belief",
    "measure_maglev",
    "run_benchmark",
    "run_benchmark_a",
    "run_benchmark_b",
    "run_cost_sweep",
    "simulate_benchmark_a",
    "simulate_maglev_truth",
    "sweep_claims",
    "system_model",
    "trace_run",
    "track",
    "write_trace",
]

import csv
import hashlib
import logging
import math
import time
from collections import Counter
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from hybridkf.complexity import (
    CostModelInput,
    CostReport,
    measured_cost,
    reduction_ratio,
    sweep_grid,
    write_sweep_csv,
)
from hybridkf.console import CONSOLE
from hybridkf.estimators import Estimator, build_estimator
from hybridkf.exceptions import HybridKFError, ModelError, ScenarioError
from hybridkf.gaussian import FloatArray, GaussianBelief
from hybridkf.models import ClaimCheck, ExperimentReport, FilterResult, ReportMetadata
from hybridkf.settings import Benchmark, ExperimentConfig, FilterKind
from hybridkf.systems import (
    GapController,
    MaglevModel,
    Simulation,
    SystemModel,
    TimeSeriesModel,
)
from hybridkf.utils import machine_descriptor, run_stream, stable_hash, version_string

LOGGER = logging.getLogger(__name__)

RUN_FAILURES = (HybridKFError, np.linalg.LinAlgError, FloatingPointError)
NEWKF_SIMILARITY = 0.15
TIME_RATIO_BAND = (0.3, 0.8)
GAP_MSE_SPREAD = 2.0
MASS_CONVERGENCE = 0.1
SWEEP_BAND = (0.70, 0.80)


@dataclass(frozen=True, eq=False)
class Trajectory:
    estimates: FloatArray
    variances: FloatArray
    seconds: float
    measurement_hash: str


@dataclass(frozen=True)
class FilterRun:
    kind: FilterKind
    mse: float | None = None
    parameter_mse: float | None = None
    final_parameter_error: float | None = None
    seconds: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class RunOutcome:
    run: int
    measurement_hash: str
    filters: list[FilterRun] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class MaglevTruth:
    states: FloatArray
    controls: FloatArray


class TraceRow(NamedTuple):
    step: int
    filter: str
    component: int
    truth: float
    estimate: float
    error: float
    variance: float


def _filter_stream(config: ExperimentConfig, run: int, kind: FilterKind) -> np.random.Generator:
    return run_stream(config.seed, run, list(FilterKind).index(kind) + 1)


def system_model(config: ExperimentConfig) -> SystemModel:
    if config.benchmark == Benchmark.A:
        return TimeSeriesModel.from_settings(
            config.timeseries, jacobian_mode=config.filter.jacobian_mode
        )
    return MaglevModel.from_settings(
        config.maglev, config.scenario, jacobian_mode=config.filter.jacobian_mode
    )


def initial_belief(config: ExperimentConfig, model: SystemModel) -> GaussianBelief:
    if config.benchmark == Benchmark.A:
        return GaussianBelief(
            mean=[config.timeseries.x0], cov=[[config.filter.initial_variance]]
        )
    scenario = config.scenario
    return GaussianBelief(
        mean=[
            scenario.reference_gap,
            0.0,
            model.holding_current(scenario.reference_gap, scenario.mass_estimate),
            scenario.mass_estimate,
        ],
        cov=np.diag([scenario.p0_gap, scenario.p0_velocity, scenario.p0_current, scenario.p0_mass]),
    )


def track(
    estimator: Estimator,
    belief: GaussianBelief,
    simulation: Simulation,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Run one estimator over a simulation, timing only the filter steps."""
    estimator.reset(belief, rng)
    steps = simulation.steps
    estimates = np.empty((steps, belief.n))
    variances = np.empty((steps, belief.n))
    consumed = np.empty_like(simulation.measurements)
    seconds = 0.0
    for k in range(steps):
        u = None if simulation.controls is None else simulation.controls[k]
        consumed[k] = simulation.measurements[k]
        start = time.perf_counter()
        estimator.advance(u, consumed[k])
        seconds += time.perf_counter() - start
        estimates[k] = estimator.mean
        variances[k] = estimator.variance
    return Trajectory(
        estimates=estimates,
        variances=variances,
        seconds=seconds,
        measurement_hash=stable_hash(consumed),
    )


def _run_filters(
    config: ExperimentConfig,
    run: int,
    model: SystemModel,
    simulation: Simulation,
    score: Callable[[FilterKind, Trajectory], FilterRun],
) -> RunOutcome:
    digest = stable_hash(simulation.measurements)
    belief = initial_belief(config, model)
    results = []
    for kind in config.filters:
        estimator = build_estimator(
            kind, model, filter_settings=config.filter, ut=config.ut, particles=config.particles
        )
        try:
            trajectory = track(estimator, belief, simulation, _filter_stream(config, run, kind))
        except RUN_FAILURES as err:
            LOGGER.warning("Run %d of %s failed: %s", run, kind, err)
            results.append(FilterRun(kind=kind, error=type(err).__name__))
            continue
        if trajectory.measurement_hash != digest:
            raise RuntimeError(f"{kind} consumed a different measurement sequence in run {run}")
        result = score(kind, trajectory)
        if result.mse is None or not math.isfinite(result.mse):
            LOGGER.warning("Run %d of %s produced a non-finite estimate", run, kind)
            result = FilterRun(kind=kind, error="NonFiniteEstimate")
        results.append(result)
    return RunOutcome(run=run, measurement_hash=digest, filters=results)


def simulate_benchmark_a(
    config: ExperimentConfig, run: int, model: SystemModel | None = None
) -> Simulation:
    model = model or system_model(config)
    truth_rng = run_stream(config.seed, run, 0)
    return model.simulate([config.timeseries.x0], config.horizon, truth_rng)


def _benchmark_a_run(config: ExperimentConfig, run: int) -> RunOutcome:
    model = system_model(config)
    simulation = simulate_benchmark_a(config, run, model)
    truth = simulation.states[1:, 0]

    def score(kind: FilterKind, trajectory: Trajectory) -> FilterRun:
        errors = trajectory.estimates[:, 0] - truth
        return FilterRun(kind=kind, mse=float(np.mean(errors**2)), seconds=trajectory.seconds)

    return _run_filters(config, run, model, simulation, score)


def simulate_maglev_truth(config: ExperimentConfig, model: MaglevModel) -> MaglevTruth:
    """Controlled plant trajectory with the scenario's load step, free of process noise."""
    scenario = config.scenario
    controller = GapController.from_scenario(model, scenario)

    def mass_at(k: int) -> float:
        if k * scenario.dt >= scenario.step_time:
            return scenario.step_mass
        return scenario.initial_mass

    steps = scenario.steps
    states = np.empty((steps + 1, model.n))
    controls = np.empty(steps)
    states[0] = [
        scenario.reference_gap,
        0.0,
        model.holding_current(scenario.reference_gap, mass_at(0)),
        mass_at(0),
    ]
    for k in range(steps):
        try:
            controls[k] = controller.voltage(states[k])
            following = model.propagate(states[k], controls[k], k)
        except ModelError as err:
            raise ScenarioError(f"The plant left its domain at step {k}: {err}") from err
        following[3] = mass_at(k + 1)
        if not np.all(np.isfinite(following)) or following[0] <= 0:
            raise ScenarioError(f"The air gap left the positive domain at step {k + 1}")
        states[k + 1] = following
    LOGGER.debug(
        "Maglev truth settles at gap %.4e m with mass %.1f kg", states[-1, 0], states[-1, 3]
    )
    return MaglevTruth(states=states, controls=controls)


def measure_maglev(
    config: ExperimentConfig, run: int, model: MaglevModel, truth: MaglevTruth
) -> Simulation:
    truth_rng = run_stream(config.seed, run, 0)
    steps = truth.controls.shape[0]
    measurements = model.observe(truth.states[1:]) + model.sample_measurement_noise(
        truth_rng, (steps,)
    )
    return Simulation(states=truth.states, measurements=measurements, controls=truth.controls)


def _benchmark_b_run(config: ExperimentConfig, run: int, truth: MaglevTruth) -> RunOutcome:
    model = system_model(config)
    simulation = measure_maglev(config, run, model, truth)
    true_gap = truth.states[1:, 0]
    true_mass = truth.states[1:, 3]

    def score(kind: FilterKind, trajectory: Trajectory) -> FilterRun:
        gap_errors = trajectory.estimates[:, 0] - true_gap
        mass_errors = trajectory.estimates[:, 3] - true_mass
        return FilterRun(
            kind=kind,
            mse=float(np.mean(gap_errors**2)),
            parameter_mse=float(np.mean(mass_errors**2)),
            final_parameter_error=float(abs(mass_errors[-1])),
            seconds=trajectory.seconds,
        )

    return _run_filters(config, run, model, simulation, score)


def _map_runs(
    function: Callable[..., RunOutcome], config: ExperimentConfig, *args: object
) -> list[RunOutcome]:
    message = f"Running {config.mc_runs} Monte-Carlo runs of benchmark {config.benchmark}"
    with CONSOLE.status(message):
        return Parallel(n_jobs=config.workers)(
            delayed(function)(config, run, *args) for run in range(config.mc_runs)
        )


def _mean_and_error(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    data = np.asarray(values)
    if data.size < 2:
        return float(data.mean()), None
    return float(data.mean()), float(data.std(ddof=1) / math.sqrt(data.size))


def _aggregate(kind: FilterKind, runs: list[FilterRun]) -> FilterResult:
    succeeded = [x for x in runs if x.error is None]
    mean_mse, mse_error = _mean_and_error([x.mse for x in succeeded])
    parameter_mse, parameter_error = _mean_and_error(
        [x.parameter_mse for x in succeeded if x.parameter_mse is not None]
    )
    final_errors = [
        x.final_parameter_error for x in succeeded if x.final_parameter_error is not None
    ]
    return FilterResult(
        filter=kind,
        runs=len(runs),
        failures=len(runs) - len(succeeded),
        failure_reasons=dict(sorted(Counter(x.error for x in runs if x.error).items())),
        mean_mse=mean_mse,
        mse_standard_error=mse_error,
        parameter_mse=parameter_mse,
        parameter_mse_standard_error=parameter_error,
        final_parameter_error=float(np.mean(final_errors)) if final_errors else None,
        total_seconds=math.fsum(x.seconds for x in succeeded) if succeeded else None,
    )


def _timed(
    config: ExperimentConfig,
    result: FilterResult,
    model: SystemModel,
    simulation: Simulation | None,
) -> FilterResult:
    try:
        cost = measured_cost(
            result.filter,
            model,
            initial_belief(config, model),
            steps=config.timing_steps,
            warmup=config.timing_warmup,
            seed=config.seed,
            simulation=simulation,
            filter_settings=config.filter,
            ut=config.ut,
            particles=config.particles,
        )
    except RUN_FAILURES as err:
        LOGGER.warning("Timing %s failed: %s", result.filter, err)
        return result
    return result.model_copy(
        update={
            "median_step_seconds": cost.median_seconds,
            "step_seconds_iqr": cost.iqr_seconds,
            "calls_per_step": cost.calls,
        }
    )


def _build_report(
    config: ExperimentConfig,
    outcomes: list[RunOutcome],
    model: SystemModel,
    timing_simulation: Simulation | None,
    constants: dict[str, float],
    steps: int,
    initial_parameter_error: float | None = None,
) -> ExperimentReport:
    results = []
    for kind in config.filters:
        runs = [y for x in outcomes for y in x.filters if y.kind == kind]
        result = _aggregate(kind, runs)
        if config.measure_timing:
            result = _timed(config, result, model, timing_simulation)
        results.append(result)
    combined = hashlib.sha256("".join(x.measurement_hash for x in outcomes).encode("utf-8"))
    metadata = ReportMetadata(
        benchmark=config.benchmark,
        seed=config.seed,
        mc_runs=config.mc_runs,
        steps=steps,
        config_hash=config.config_hash(),
        measurement_hash=combined.hexdigest(),
        jacobian_mode=config.filter.jacobian_mode,
        constants=constants,
        initial_parameter_error=initial_parameter_error,
        version=version_string(),
        machine=machine_descriptor(),
    )
    report = ExperimentReport(metadata=metadata, results=results)
    if config.benchmark == Benchmark.A:
        report.claims = benchmark_a_claims(report)
    else:
        report.claims = benchmark_b_claims(report)
    for result in results:
        if result.failures:
            LOGGER.warning("%s failed %d of %d runs", result.filter, result.failures, result.runs)
    return report


def run_benchmark_a(config: ExperimentConfig) -> ExperimentReport:
    LOGGER.info("Benchmark a: %d runs of %s", config.mc_runs, ", ".join(map(str, config.filters)))
    outcomes = _map_runs(_benchmark_a_run, config)
    return _build_report(
        config,
        outcomes,
        model=system_model(config),
        timing_simulation=None,
        constants={k: float(v) for k, v in config.timeseries.model_dump().items()},
        steps=config.horizon,
    )


def run_benchmark_b(config: ExperimentConfig) -> ExperimentReport:
    LOGGER.info("Benchmark b: %d runs of %s", config.mc_runs, ", ".join(map(str, config.filters)))
    model = system_model(config)
    truth = simulate_maglev_truth(config, model)
    outcomes = _map_runs(_benchmark_b_run, config, truth)
    return _build_report(
        config,
        outcomes,
        model=model,
        timing_simulation=measure_maglev(config, 0, model, truth),
        constants={k: float(v) for k, v in config.maglev.model_dump().items()},
        steps=config.scenario.steps,
        initial_parameter_error=abs(config.scenario.mass_estimate - float(truth.states[-1, 3])),
    )


def run_benchmark(config: ExperimentConfig) -> ExperimentReport:
    if config.benchmark == Benchmark.A:
        return run_benchmark_a(config)
    return run_benchmark_b(config)


def _value(report: ExperimentReport, kind: FilterKind, name: str) -> float | None:
    result = report.result(kind)
    return None if result is None else getattr(result, name)


def benchmark_a_claims(report: ExperimentReport) -> list[ClaimCheck]:
    claims = []
    ekf = _value(report, FilterKind.EKF, "mean_mse")
    ukf = _value(report, FilterKind.UKF, "mean_mse")
    newkf = _value(report, FilterKind.NEWKF, "mean_mse")
    if ekf is not None and ukf is not None:
        claims.append(
            ClaimCheck(
                name="UKF tracks better than EKF",
                expected="MSE(EKF) > MSE(UKF)",
                observed=f"{ekf:.4g} vs {ukf:.4g}",
                holds=ekf > ukf,
            )
        )
    if newkf is not None and ukf is not None and ukf > 0:
        gap = abs(newkf - ukf) / ukf
        claims.append(
            ClaimCheck(
                name="NewKF matches UKF accuracy",
                expected=f"|MSE(NewKF) - MSE(UKF)| / MSE(UKF) <= {NEWKF_SIMILARITY}",
                observed=f"{gap:.3f}",
                holds=gap <= NEWKF_SIMILARITY,
            )
        )
    pf = _value(report, FilterKind.PF, "mean_mse")
    pf_newkf = _value(report, FilterKind.PF_NEWKF, "mean_mse")
    if pf is not None and pf_newkf is not None:
        claims.append(
            ClaimCheck(
                name="NewKF proposal improves the particle filter",
                expected="MSE(PF-NewKF) < MSE(PF)",
                observed=f"{pf_newkf:.4g} vs {pf:.4g}",
                holds=pf_newkf < pf,
            )
        )
    ukf_time = _value(report, FilterKind.UKF, "total_seconds")
    newkf_time = _value(report, FilterKind.NEWKF, "total_seconds")
    if ukf_time and newkf_time is not None:
        ratio = newkf_time / ukf_time
        lower, upper = TIME_RATIO_BAND
        claims.append(
            ClaimCheck(
                name="NewKF runs in a fraction of the UKF time",
                expected=f"{lower} <= T(NewKF) / T(UKF) <= {upper}",
                observed=f"{ratio:.3f}",
                holds=lower <= ratio <= upper,
            )
        )
    return claims


def benchmark_b_claims(report: ExperimentReport) -> list[ClaimCheck]:
    claims = []
    ekf = _value(report, FilterKind.EKF, "parameter_mse")
    for kind in (FilterKind.NEWKF, FilterKind.UKF):
        value = _value(report, kind, "parameter_mse")
        if ekf is not None and value is not None:
            claims.append(
                ClaimCheck(
                    name=f"{kind} estimates the mass better than EKF",
                    expected=f"parameter MSE({kind}) < parameter MSE(EKF)",
                    observed=f"{value:.4g} vs {ekf:.4g}",
                    holds=value < ekf,
                )
            )
    gaps = [x.mean_mse for x in report.results if x.mean_mse is not None]
    if len(gaps) > 1 and min(gaps) > 0:
        spread = max(gaps) / min(gaps)
        claims.append(
            ClaimCheck(
                name="Air-gap accuracy is comparable",
                expected=f"max / min air-gap MSE <= {GAP_MSE_SPREAD}",
                observed=f"{spread:.3f}",
                holds=spread <= GAP_MSE_SPREAD,
            )
        )
    initial = report.metadata.initial_parameter_error
    for result in report.results:
        if initial and result.final_parameter_error is not None:
            share = result.final_parameter_error / initial
            claims.append(
                ClaimCheck(
                    name=f"{result.filter} mass estimate converges",
                    expected=f"final mass error < {MASS_CONVERGENCE:.0%} of the initial error",
                    observed=f"{share:.1%}",
                    holds=share < MASS_CONVERGENCE,
                )
            )
    return claims


def sweep_claims() -> list[ClaimCheck]:
    """The published reduction figures, evaluated with the closed-form counts."""
    single = reduction_ratio(CostModelInput(n=1, m=1, j=5))
    claims = [
        ClaimCheck(
            name="65% reduction for n=1, m=1, j=5",
            expected="0.65 +/- 0.01",
            observed=f"{single:.3f}",
            holds=abs(single - 0.65) <= 0.01,
        )
    ]
    maglev = reduction_ratio(CostModelInput(n=4, m=1, j=30))
    claims.append(
        ClaimCheck(
            name="61% reduction for n=4, m=1, j=30",
            expected="0.61 +/- 0.01",
            observed=f"{maglev:.3f}",
            holds=abs(maglev - 0.61) <= 0.01,
        )
    )
    lower, upper = SWEEP_BAND
    for report in sweep_grid([50, 100, 200], "n/2", "10n"):
        claims.append(
            ClaimCheck(
                name=f"About 75% reduction for n={report.n}, m=n/2, j=10n",
                expected=f"{lower} <= reduction <= {upper}",
                observed=f"{report.reduction:.3f}",
                holds=lower <= report.reduction <= upper,
            )
        )
    return claims


def run_cost_sweep(
    n_range: Iterable[int],
    m_rule: str | int,
    j_rule: str | int,
    path: Path | None = None,
) -> tuple[list[CostReport], list[ClaimCheck]]:
    reports = sweep_grid(n_range, m_rule, j_rule)
    if path is not None:
        write_sweep_csv(reports, path)
        LOGGER.info("Wrote %d sweep rows to %s", len(reports), path)
    return reports, sweep_claims()


def trace_run(config: ExperimentConfig, run_index: int) -> list[TraceRow]:
    """Per-step truth, estimate, error and variance of every configured filter for one run."""
    if run_index < 0:
        raise ValueError(f"run_index must be non-negative, got {run_index}")
    model = system_model(config)
    if config.benchmark == Benchmark.A:
        simulation = simulate_benchmark_a(config, run_index, model)
    else:
        simulation = measure_maglev(
            config, run_index, model, simulate_maglev_truth(config, model)
        )
    belief = initial_belief(config, model)
    truth = simulation.states[1:]
    rows = []
    for kind in config.filters:
        estimator = build_estimator(
            kind, model, filter_settings=config.filter, ut=config.ut, particles=config.particles
        )
        try:
            stream = _filter_stream(config, run_index, kind)
            trajectory = track(estimator, belief, simulation, stream)
        except RUN_FAILURES as err:
            LOGGER.warning("Trace of %s failed: %s", kind, err)
            continue
        for step in range(simulation.steps):
            for component in range(model.n):
                estimate = float(trajectory.estimates[step, component])
                actual = float(truth[step, component])
                rows.append(
                    TraceRow(
                        step=step + 1,
                        filter=str(kind),
                        component=component,
                        truth=actual,
                        estimate=estimate,
                        error=estimate - actual,
                        variance=float(trajectory.variances[step, component]),
                    )
                )
    return rows


def write_trace(rows: list[TraceRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(TraceRow._fields)
        writer.writerows(
            tuple(repr(x) if isinstance(x, float) else x for x in row) for row in rows
        )
    return path
