from __future__ import annotations

__all__ = [
    "FloatArray",
    "GaussianBelief",
    "SigmaPointSet",
    "UtParams",
    "batch_size",
    "covariance_factor",
    "gaussian_logpdf",
    "matrix_sqrt",
    "nearest_psd",
    "sample_gaussian",
    "spherical_simplex_points",
    "symmetric_sigma_points",
    "symmetrize",
    "transpose",
    "unscented_covariance",
    "unscented_cross_covariance",
    "unscented_mean",
]

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.typing import NDArray

from hybridkf.exceptions import CardinalityError, NotPositiveSemiDefiniteError
from hybridkf.instrument import record

LOGGER = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ArrayLike = Union[FloatArray, float, list]

JITTER_LADDER = (1e-12, 1e-10, 1e-8)
PSD_TOLERANCE = 1e-9


def transpose(matrix: FloatArray) -> FloatArray:
    return np.swapaxes(matrix, -1, -2)


def symmetrize(matrix: FloatArray) -> FloatArray:
    return 0.5 * (matrix + transpose(matrix))


def batch_size(shape: tuple[int, ...]) -> int:
    return math.prod(shape)


def _frozen(array: FloatArray) -> FloatArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Mean and covariance of a Gaussian, optionally with leading batch axes.

    The covariance is symmetrized on construction; `is_psd` checks the PSD invariant
    without enforcing it.
    """

    mean: FloatArray
    cov: FloatArray

    def __post_init__(self: GaussianBelief) -> None:
        mean = np.array(self.mean, dtype=float, ndmin=1)
        cov = np.array(self.cov, dtype=float, ndmin=2)
        if cov.shape != (*mean.shape, mean.shape[-1]):
            raise ValueError(
                f"Covariance shape {cov.shape} does not match mean shape {mean.shape}"
            )
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(symmetrize(cov)))

    @property
    def n(self: GaussianBelief) -> int:
        return self.mean.shape[-1]

    @property
    def batch_shape(self: GaussianBelief) -> tuple[int, ...]:
        return self.mean.shape[:-1]

    def __getitem__(self: GaussianBelief, index: int | tuple[int, ...]) -> GaussianBelief:
        return GaussianBelief(mean=self.mean[index], cov=self.cov[index])

    def is_psd(self: GaussianBelief, tolerance: float = PSD_TOLERANCE) -> bool:
        eigenvalues = np.linalg.eigvalsh(self.cov)
        largest = np.maximum(eigenvalues[..., -1], 0.0)
        return bool(np.all(eigenvalues[..., 0] >= -tolerance * largest))

    def scaled(self: GaussianBelief, factor: float) -> GaussianBelief:
        return GaussianBelief(mean=self.mean, cov=self.cov * factor**2)


@dataclass(frozen=True)
class UtParams:
    lambda_: float | None = None
    w0_simplex: float = 0.5

    def __post_init__(self: UtParams) -> None:
        if not 0.0 <= self.w0_simplex < 1.0:
            raise ValueError(f"w0_simplex must lie in [0, 1), got {self.w0_simplex}")

    def spread(self: UtParams, n: int) -> float:
        value = 3.0 - n if self.lambda_ is None else float(self.lambda_)
        if n + value <= 0:
            raise ValueError(f"n + lambda must be positive, got n={n} and lambda={value}")
        return value


@dataclass(frozen=True, eq=False)
class SigmaPointSet:
    points: FloatArray
    mean_weights: FloatArray
    cov_weights: FloatArray

    @property
    def size(self: SigmaPointSet) -> int:
        return self.points.shape[-2]

    @property
    def center(self: SigmaPointSet) -> FloatArray:
        return self.points[..., 0, :]


def _failing_minor(matrix: FloatArray) -> int:
    for order in range(1, matrix.shape[-1] + 1):
        try:
            np.linalg.cholesky(matrix[:order, :order])
        except np.linalg.LinAlgError:
            return order
    return matrix.shape[-1]


def _jittered_cholesky(matrix: FloatArray) -> FloatArray:
    n = matrix.shape[-1]
    scale = float(np.trace(matrix)) / n
    if not math.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    identity = np.eye(n)
    for epsilon in JITTER_LADDER:
        try:
            root = np.linalg.cholesky(matrix + epsilon * scale * identity)
        except np.linalg.LinAlgError:
            continue
        LOGGER.debug("Cholesky needed a jitter of %.1e", epsilon * scale)
        return root
    raise NotPositiveSemiDefiniteError(
        leading_minor=_failing_minor(matrix + JITTER_LADDER[-1] * scale * identity)
    )


def matrix_sqrt(cov: ArrayLike) -> FloatArray:
    """Lower-triangular L with L @ L.T == cov, retried with a diagonal jitter ladder."""
    cov = np.asarray(cov, dtype=float)
    record("cholesky", batch_size(cov.shape[:-2]))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    if cov.ndim == 2:
        return _jittered_cholesky(cov)
    n = cov.shape[-1]
    flat = cov.reshape(-1, n, n)
    roots = np.empty_like(flat)
    for index, matrix in enumerate(flat):
        try:
            roots[index] = np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            roots[index] = _jittered_cholesky(matrix)
    return roots.reshape(cov.shape)


def covariance_factor(cov: ArrayLike) -> FloatArray:
    """Factor A with A @ A.T == cov from an eigendecomposition; exact zeros stay zero."""
    values, vectors = np.linalg.eigh(symmetrize(np.asarray(cov, dtype=float)))
    return vectors * np.sqrt(np.clip(values, 0.0, None))[..., None, :]


def nearest_psd(cov: FloatArray) -> FloatArray:
    cov = symmetrize(cov)
    eigenvalues = np.linalg.eigvalsh(cov)
    largest = np.maximum(eigenvalues[..., -1], 0.0)
    if np.all(eigenvalues[..., 0] >= -PSD_TOLERANCE * largest):
        return cov
    LOGGER.debug("Clipping negative eigenvalues of a covariance")
    values, vectors = np.linalg.eigh(cov)
    clipped = np.clip(values, 0.0, None)
    return symmetrize((vectors * clipped[..., None, :]) @ transpose(vectors))


@lru_cache(maxsize=64)
def _symmetric_weights(n: int, spread: float) -> FloatArray:
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + spread)))
    weights[0] = spread / (n + spread)
    return _frozen(weights)


def symmetric_sigma_points(belief: GaussianBelief, params: UtParams) -> SigmaPointSet:
    n = belief.n
    spread = params.spread(n)
    offsets = transpose(matrix_sqrt((n + spread) * belief.cov))
    center = belief.mean[..., None, :]
    points = np.concatenate([center, center + offsets, center - offsets], axis=-2)
    weights = _symmetric_weights(n, spread)
    return SigmaPointSet(points=points, mean_weights=weights, cov_weights=weights)


@lru_cache(maxsize=64)
def _simplex_unit_points(n: int, w0: float) -> tuple[FloatArray, FloatArray]:
    # Row 0 is the center; columns are grown one dimension at a time.
    w1 = (1.0 - w0) / (n + 1)
    unit = np.zeros((n + 2, n))
    unit[1, 0] = -1.0 / math.sqrt(2.0 * w1)
    unit[2, 0] = 1.0 / math.sqrt(2.0 * w1)
    for j in range(2, n + 1):
        value = 1.0 / math.sqrt(j * (j + 1) * w1)
        unit[1 : j + 1, j - 1] = -value
        unit[j + 1, j - 1] = j * value
    weights = np.full(n + 2, w1)
    weights[0] = w0
    return _frozen(unit), _frozen(weights)


def spherical_simplex_points(belief: GaussianBelief, params: UtParams) -> SigmaPointSet:
    unit, weights = _simplex_unit_points(belief.n, params.w0_simplex)
    root = matrix_sqrt(belief.cov)
    points = belief.mean[..., None, :] + unit @ transpose(root)
    return SigmaPointSet(points=points, mean_weights=weights, cov_weights=weights)


def _check_cardinality(sigma_set: SigmaPointSet, transformed: FloatArray) -> None:
    if transformed.ndim < 2 or transformed.shape[-2] != sigma_set.size:
        raise CardinalityError(
            f"Expected {sigma_set.size} transformed points, got shape {transformed.shape}"
        )


def unscented_mean(sigma_set: SigmaPointSet, transformed: ArrayLike) -> FloatArray:
    transformed = np.asarray(transformed, dtype=float)
    _check_cardinality(sigma_set, transformed)
    return sigma_set.mean_weights @ transformed


def unscented_covariance(
    sigma_set: SigmaPointSet, transformed: ArrayLike, transformed_mean: ArrayLike
) -> FloatArray:
    transformed = np.asarray(transformed, dtype=float)
    _check_cardinality(sigma_set, transformed)
    deviations = transformed - np.asarray(transformed_mean, dtype=float)[..., None, :]
    weighted = sigma_set.cov_weights[:, None] * deviations
    return symmetrize(transpose(deviations) @ weighted)


def unscented_cross_covariance(
    sigma_set: SigmaPointSet,
    state_mean: FloatArray,
    transformed: FloatArray,
    transformed_mean: FloatArray,
) -> FloatArray:
    _check_cardinality(sigma_set, transformed)
    state_deviations = sigma_set.points - state_mean[..., None, :]
    deviations = transformed - transformed_mean[..., None, :]
    return transpose(state_deviations) @ (sigma_set.cov_weights[:, None] * deviations)


def gaussian_logpdf(x: FloatArray, mean: FloatArray, cov: FloatArray) -> FloatArray:
    root = matrix_sqrt(cov)
    whitened = np.linalg.solve(root, (x - mean)[..., None])[..., 0]
    log_det = 2.0 * np.sum(np.log(np.diagonal(root, axis1=-2, axis2=-1)), axis=-1)
    n = x.shape[-1]
    return -0.5 * (np.sum(whitened**2, axis=-1) + log_det + n * math.log(2.0 * math.pi))


def sample_gaussian(belief: GaussianBelief, rng: np.random.Generator) -> FloatArray:
    root = matrix_sqrt(belief.cov)
    noise = rng.standard_normal(belief.mean.shape)
    return belief.mean + (root @ noise[..., None])[..., 0]
