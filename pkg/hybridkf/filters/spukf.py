from __future__ import annotations

__all__ = ["SinglePointUKF", "spukf_step"]

from hybridkf.filters._base import BaseFilter, FilterState, PredictedMeasurement, Prediction
from hybridkf.filters.ukf import unscented_measurement, unscented_moments
from hybridkf.gaussian import (
    FloatArray,
    SigmaPointSet,
    UtParams,
    symmetric_sigma_points,
    transpose,
)
from hybridkf.systems import SystemModel


def expand_points(
    sigma_set: SigmaPointSet, center_value: FloatArray, jacobian: FloatArray
) -> FloatArray:
    """First-order images g(x0) + J (x_i - x0) of every sigma point."""
    offsets = sigma_set.points - sigma_set.center[..., None, :]
    return center_value[..., None, :] + offsets @ transpose(jacobian)


class SinglePointUKF(BaseFilter):
    """UKF that evaluates f and h only at the central point and expands the rest to first order."""

    name = "SPUKF"

    def predict(
        self: SinglePointUKF, state: FilterState, model: SystemModel, u: object = None
    ) -> Prediction:
        sigma_set = symmetric_sigma_points(state.belief, self.ut)
        center = state.belief.mean
        center_value, jacobian = model.f_with_jacobian(center[..., None, :], u, state.step)
        propagated = expand_points(sigma_set, center_value[..., 0, :], jacobian)
        return Prediction(
            belief=unscented_moments(sigma_set, propagated, model.Q),
            step=state.step + 1,
            sigma_set=sigma_set,
            propagated=propagated,
        )

    def predict_measurement(
        self: SinglePointUKF, prediction: Prediction, model: SystemModel
    ) -> PredictedMeasurement:
        sigma_set = symmetric_sigma_points(prediction.belief, self.ut)
        center = prediction.belief.mean
        transformed = expand_points(
            sigma_set, model.h(center, prediction.step), model.jac_h(center, prediction.step)
        )
        return unscented_measurement(sigma_set, center, transformed, model.R)


def spukf_step(
    state: FilterState,
    model: SystemModel,
    u: object,
    y: FloatArray,
    params: UtParams | None = None,
    condition_limit: float = 1e12,
) -> FilterState:
    return SinglePointUKF(ut=params, condition_limit=condition_limit).step(state, model, u, y)
