from __future__ import annotations

__all__ = [
    "BaseFilter",
    "FilterState",
    "PredictedMeasurement",
    "Prediction",
    "kalman_gain",
    "linearized_covariance",
]

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from hybridkf.exceptions import InnovationCovarianceError
from hybridkf.gaussian import (
    FloatArray,
    GaussianBelief,
    SigmaPointSet,
    UtParams,
    batch_size,
    nearest_psd,
    symmetrize,
    transpose,
)
from hybridkf.instrument import record
from hybridkf.systems import SystemModel

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FilterState:
    belief: GaussianBelief
    step: int = 0


@dataclass(frozen=True, eq=False)
class Prediction:
    """Predicted belief for time index `step`, with the points that produced it, if any."""

    belief: GaussianBelief
    step: int
    sigma_set: SigmaPointSet | None = None
    propagated: FloatArray | None = None


@dataclass(frozen=True, eq=False)
class PredictedMeasurement:
    mean: FloatArray
    innovation_cov: FloatArray
    cross_cov: FloatArray
    jacobian: FloatArray | None = None


def linearized_covariance(jacobian: FloatArray, cov: FloatArray, noise: FloatArray) -> FloatArray:
    return symmetrize(jacobian @ cov @ transpose(jacobian) + noise)


def kalman_gain(
    cross_cov: FloatArray, innovation_cov: FloatArray, condition_limit: float = 1e12
) -> FloatArray:
    """K = P_xy S^-1 through a Cholesky factor of S; fails instead of regularizing.

    The condition estimate is taken per matrix of a batch.
    """
    record("cholesky", batch_size(innovation_cov.shape[:-2]))
    try:
        root = np.linalg.cholesky(innovation_cov)
    except np.linalg.LinAlgError:
        raise InnovationCovarianceError(
            condition=float(np.max(np.linalg.cond(innovation_cov)))
        ) from None
    diagonal = np.abs(np.diagonal(root, axis1=-2, axis2=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        conditions = (diagonal.max(axis=-1) / diagonal.min(axis=-1)) ** 2
    worst = float(np.max(conditions))
    if not worst <= condition_limit:
        raise InnovationCovarianceError(condition=worst)
    if root.ndim == 2:
        return linalg.cho_solve((root, True), transpose(cross_cov), check_finite=False).T
    whitened = np.linalg.solve(root, transpose(cross_cov))
    return transpose(np.linalg.solve(transpose(root), whitened))


class BaseFilter(ABC):
    """One Kalman-type filter: `predict` then `update`, each a pure function of its inputs."""

    name: str = ""

    def __init__(
        self: BaseFilter,
        ut: UtParams | None = None,
        joseph_form: bool = True,
        condition_limit: float = 1e12,
    ):
        self.ut = ut or UtParams()
        self.joseph_form = joseph_form
        self.condition_limit = condition_limit

    def __repr__(self: BaseFilter) -> str:
        return f"{type(self).__name__}(ut={self.ut}, joseph_form={self.joseph_form})"

    @abstractmethod
    def predict(
        self: BaseFilter, state: FilterState, model: SystemModel, u: object = None
    ) -> Prediction: ...

    @abstractmethod
    def predict_measurement(
        self: BaseFilter, prediction: Prediction, model: SystemModel
    ) -> PredictedMeasurement: ...

    def update(
        self: BaseFilter, prediction: Prediction, model: SystemModel, y: FloatArray
    ) -> FilterState:
        measurement = self.predict_measurement(prediction, model)
        return self.correct(prediction, measurement, model, y)

    def step(
        self: BaseFilter, state: FilterState, model: SystemModel, u: object, y: FloatArray
    ) -> FilterState:
        return self.update(self.predict(state, model, u), model, y)

    def correct(
        self: BaseFilter,
        prediction: Prediction,
        measurement: PredictedMeasurement,
        model: SystemModel,
        y: FloatArray,
    ) -> FilterState:
        prior = prediction.belief
        gain = kalman_gain(measurement.cross_cov, measurement.innovation_cov, self.condition_limit)
        innovation = np.asarray(y, dtype=float) - measurement.mean
        mean = prior.mean + (gain @ innovation[..., None])[..., 0]
        if measurement.jacobian is None:
            cov = prior.cov - gain @ measurement.innovation_cov @ transpose(gain)
        else:
            reduction = np.eye(prior.n) - gain @ measurement.jacobian
            if self.joseph_form:
                cov = reduction @ prior.cov @ transpose(reduction) + gain @ model.R @ transpose(
                    gain
                )
            else:
                cov = reduction @ prior.cov
        return FilterState(
            belief=GaussianBelief(mean=mean, cov=nearest_psd(cov)), step=prediction.step
        )
