from __future__ import annotations

__all__ = ["UnscentedKalmanFilter", "ukf_step", "unscented_measurement", "unscented_moments"]

from collections.abc import Callable

from hybridkf.filters._base import BaseFilter, FilterState, PredictedMeasurement, Prediction
from hybridkf.gaussian import (
    FloatArray,
    GaussianBelief,
    SigmaPointSet,
    UtParams,
    nearest_psd,
    symmetric_sigma_points,
    unscented_covariance,
    unscented_cross_covariance,
    unscented_mean,
)
from hybridkf.systems import SystemModel

PointRule = Callable[[GaussianBelief, UtParams], SigmaPointSet]


def unscented_moments(
    sigma_set: SigmaPointSet, transformed: FloatArray, noise: FloatArray
) -> GaussianBelief:
    mean = unscented_mean(sigma_set, transformed)
    cov = unscented_covariance(sigma_set, transformed, mean) + noise
    return GaussianBelief(mean=mean, cov=nearest_psd(cov))


def unscented_measurement(
    sigma_set: SigmaPointSet, state_mean: FloatArray, transformed: FloatArray, noise: FloatArray
) -> PredictedMeasurement:
    mean = unscented_mean(sigma_set, transformed)
    return PredictedMeasurement(
        mean=mean,
        innovation_cov=unscented_covariance(sigma_set, transformed, mean) + noise,
        cross_cov=unscented_cross_covariance(sigma_set, state_mean, transformed, mean),
    )


class UnscentedKalmanFilter(BaseFilter):
    """Unscented transform in both stages, redrawing the measurement points from the prior."""

    name = "UKF"

    def sigma_points(
        self: UnscentedKalmanFilter, belief: GaussianBelief
    ) -> SigmaPointSet:
        return symmetric_sigma_points(belief, self.ut)

    def predict(
        self: UnscentedKalmanFilter, state: FilterState, model: SystemModel, u: object = None
    ) -> Prediction:
        sigma_set = self.sigma_points(state.belief)
        propagated = model.f(sigma_set.points, u, state.step)
        return Prediction(
            belief=unscented_moments(sigma_set, propagated, model.Q),
            step=state.step + 1,
            sigma_set=sigma_set,
            propagated=propagated,
        )

    def predict_measurement(
        self: UnscentedKalmanFilter, prediction: Prediction, model: SystemModel
    ) -> PredictedMeasurement:
        sigma_set = self.sigma_points(prediction.belief)
        transformed = model.h(sigma_set.points, prediction.step)
        return unscented_measurement(sigma_set, prediction.belief.mean, transformed, model.R)


def ukf_step(
    state: FilterState,
    model: SystemModel,
    u: object,
    y: FloatArray,
    params: UtParams | None = None,
    condition_limit: float = 1e12,
) -> FilterState:
    return UnscentedKalmanFilter(ut=params, condition_limit=condition_limit).step(
        state, model, u, y
    )
