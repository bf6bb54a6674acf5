from __future__ import annotations

__all__ = [
    "EXACT",
    "MomentEstimate",
    "TransformError",
    "TransformMethod",
    "convergence_order",
    "mc_moments",
    "polynomial_moments",
    "sin_moments",
    "transform_error",
    "transform_moments",
]

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from hybridkf.exceptions import OracleNoiseError
from hybridkf.filters.spukf import expand_points
from hybridkf.gaussian import (
    FloatArray,
    GaussianBelief,
    UtParams,
    sample_gaussian,
    spherical_simplex_points,
    symmetric_sigma_points,
    transpose,
    unscented_covariance,
    unscented_mean,
)
from hybridkf.settings import SettingsEnum
from hybridkf.systems import numeric_jacobian

LOGGER = logging.getLogger(__name__)

EXACT = math.inf
MIN_SAMPLES = 10_000
ROUND_OFF = 1e-12

VectorFunction = Callable[[FloatArray], FloatArray]


class TransformMethod(SettingsEnum):
    LINEARIZED = "linearized"
    UT = "ut"
    SIMPLEX_UT = "simplex-ut"
    SINGLE_POINT_UT = "single-point-ut"


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """Mean and covariance of g(x); closed-form estimates carry zero samples and zero error."""

    mean: FloatArray
    cov: FloatArray
    n_samples: int
    standard_error: FloatArray

    @classmethod
    def exact(cls: type[MomentEstimate], mean: object, cov: object) -> MomentEstimate:
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(
            mean=mean,
            cov=np.atleast_2d(np.asarray(cov, dtype=float)),
            n_samples=0,
            standard_error=np.zeros_like(mean),
        )

    @property
    def is_exact(self: MomentEstimate) -> bool:
        return self.n_samples == 0


class TransformError(NamedTuple):
    mean_err: float
    cov_err: float
    inconclusive: bool = False


def _evaluate(g: VectorFunction, samples: FloatArray) -> FloatArray:
    values = np.asarray(g(samples), dtype=float).reshape(samples.shape[0], -1)
    if not np.all(np.isfinite(values)):
        raise ValueError("g produced a non-finite value on a Gaussian sample")
    return values


def mc_moments(
    g: VectorFunction,
    belief: GaussianBelief,
    n_samples: int,
    rng: np.random.Generator,
    shards: int = 8,
    workers: int | None = None,
) -> MomentEstimate:
    """Monte-Carlo mean and covariance of g(x) for x drawn from `belief`.

    Samples are drawn in `shards` with independent child streams and reduced with exactly
    rounded sums, so the estimate does not depend on how shards are scheduled.
    """
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"Use at least {MIN_SAMPLES} samples, got {n_samples}")
    children = np.random.SeedSequence(int(rng.integers(2**63))).spawn(shards)
    sizes = [n_samples // shards + (index < n_samples % shards) for index in range(shards)]

    def draw(index: int) -> FloatArray:
        child = np.random.default_rng(children[index])
        spread = GaussianBelief(
            mean=np.broadcast_to(belief.mean, (sizes[index], belief.n)),
            cov=np.broadcast_to(belief.cov, (sizes[index], belief.n, belief.n)),
        )
        return _evaluate(g, sample_gaussian(spread, child))

    if workers and workers > 1:
        parts = Parallel(n_jobs=workers, prefer="threads")(
            delayed(draw)(index) for index in range(shards)
        )
    else:
        parts = [draw(index) for index in range(shards)]
    values = np.concatenate(parts, axis=0)
    mean = np.array([math.fsum(column) for column in values.T]) / n_samples
    deviations = values - mean
    dim = values.shape[1]
    cov = np.empty((dim, dim))
    for row in range(dim):
        for col in range(row, dim):
            cov[row, col] = cov[col, row] = math.fsum(deviations[:, row] * deviations[:, col]) / (
                n_samples - 1
            )
    return MomentEstimate(
        mean=mean,
        cov=cov,
        n_samples=n_samples,
        standard_error=np.sqrt(np.diag(cov) / n_samples),
    )


def sin_moments(mean: float, variance: float) -> MomentEstimate:
    """Exact mean and variance of sin(x) for x ~ N(mean, variance)."""
    expected = math.sin(mean) * math.exp(-variance / 2.0)
    second = 0.5 * (1.0 - math.cos(2.0 * mean) * math.exp(-2.0 * variance))
    return MomentEstimate.exact(mean=[expected], cov=[[second - expected**2]])


def polynomial_moments(coeffs: Sequence[float], mean: float, variance: float) -> MomentEstimate:
    """Exact mean and variance of p(x) for x ~ N(mean, variance).

    Coefficients run from the highest power down.
    """
    scale = math.sqrt(variance)

    def expectation(polynomial: FloatArray) -> float:
        degree = len(polynomial) - 1
        return math.fsum(
            coefficient * (1.0 if power == 0 else stats.norm.moment(power, loc=mean, scale=scale))
            for coefficient, power in zip(polynomial, range(degree, -1, -1))
        )

    coefficients = np.asarray(coeffs, dtype=float)
    first = expectation(coefficients)
    second = expectation(np.polymul(coefficients, coefficients))
    return MomentEstimate.exact(mean=[first], cov=[[second - first**2]])


def transform_moments(
    method: TransformMethod,
    g: VectorFunction,
    belief: GaussianBelief,
    params: UtParams | None = None,
    jacobian: VectorFunction | None = None,
) -> tuple[FloatArray, FloatArray]:
    """Mean and covariance of g(x) as each approximation sees them."""
    params = params or UtParams()

    def slope(x: FloatArray) -> FloatArray:
        if jacobian is not None:
            return np.atleast_2d(np.asarray(jacobian(x), dtype=float))
        return numeric_jacobian(lambda z: np.atleast_1d(g(z)), x)

    if method == TransformMethod.LINEARIZED:
        matrix = slope(belief.mean)
        mean = np.atleast_1d(np.asarray(g(belief.mean), dtype=float))
        return mean, matrix @ belief.cov @ transpose(matrix)
    if method == TransformMethod.SIMPLEX_UT:
        sigma_set = spherical_simplex_points(belief, params)
    else:
        sigma_set = symmetric_sigma_points(belief, params)
    if method == TransformMethod.SINGLE_POINT_UT:
        center = np.atleast_1d(np.asarray(g(belief.mean), dtype=float))
        transformed = expand_points(sigma_set, center, slope(belief.mean))
    else:
        transformed = np.asarray(g(sigma_set.points), dtype=float).reshape(sigma_set.size, -1)
    mean = unscented_mean(sigma_set, transformed)
    return mean, unscented_covariance(sigma_set, transformed, mean)


def transform_error(
    method: TransformMethod,
    g: VectorFunction,
    belief: GaussianBelief,
    oracle: MomentEstimate,
    params: UtParams | None = None,
    jacobian: VectorFunction | None = None,
) -> TransformError:
    mean, cov = transform_moments(method, g, belief, params=params, jacobian=jacobian)
    mean_err = float(np.linalg.norm(mean - oracle.mean))
    cov_err = float(np.linalg.norm(cov - oracle.cov, ord="fro"))
    noise = float(np.max(oracle.standard_error)) if oracle.standard_error.size else 0.0
    return TransformError(
        mean_err=mean_err, cov_err=cov_err, inconclusive=noise > 0.1 * mean_err
    )


def convergence_order(
    method: TransformMethod,
    g: VectorFunction,
    belief: GaussianBelief,
    scales: Sequence[float],
    oracle: Callable[[GaussianBelief], MomentEstimate],
    params: UtParams | None = None,
    jacobian: VectorFunction | None = None,
    quantity: str = "mean",
) -> float:
    """Slope of log(error) against log(scale) with the covariance scaled by scale squared.

    Returns `EXACT` when every error sits at round-off.
    """
    scales = [float(x) for x in scales]
    if len(scales) < 4:
        raise ValueError("Fit the order over at least 4 scales")
    if any(later >= earlier for earlier, later in zip(scales, scales[1:])):
        raise ValueError("Scales must be strictly decreasing")
    if quantity not in ("mean", "cov"):
        raise ValueError(f"quantity must be `mean` or `cov`, got `{quantity}`")
    errors = []
    for scale in scales:
        scaled = belief.scaled(scale)
        reference = oracle(scaled)
        error = transform_error(method, g, scaled, reference, params=params, jacobian=jacobian)
        if not reference.is_exact and error.inconclusive:
            raise OracleNoiseError(
                f"Oracle standard error exceeds 10% of the {method} error at scale {scale}"
            )
        value = error.mean_err if quantity == "mean" else error.cov_err
        magnitude = np.abs(reference.mean if quantity == "mean" else reference.cov).max()
        errors.append((value, ROUND_OFF * max(1.0, float(magnitude))))
    if all(value <= floor for value, floor in errors):
        return EXACT
    if any(value <= floor for value, floor in errors):
        raise OracleNoiseError(f"Some {method} errors sit at round-off, the slope is undefined")
    slope, _ = np.polyfit(np.log(scales), np.log([value for value, _ in errors]), 1)
    LOGGER.debug("Fitted %s %s order %.3f", method, quantity, slope)
    return float(slope)
