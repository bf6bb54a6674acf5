from __future__ import annotations

__all__ = ["ExtendedKalmanFilter", "ekf_step", "linearized_measurement"]

import numpy as np

from hybridkf.filters._base import (
    BaseFilter,
    FilterState,
    PredictedMeasurement,
    Prediction,
    linearized_covariance,
)
from hybridkf.gaussian import FloatArray, GaussianBelief, transpose
from hybridkf.systems import SystemModel


def linearized_measurement(
    belief: GaussianBelief, model: SystemModel, step: int, mean: FloatArray | None = None
) -> PredictedMeasurement:
    """Measurement moments with H taken at the predicted mean; `mean` overrides h(x)."""
    jacobian = model.jac_h(belief.mean, step)
    if mean is None:
        mean = model.h(belief.mean, step)
    cross_cov = belief.cov @ transpose(jacobian)
    innovation_cov = jacobian @ cross_cov + model.R
    return PredictedMeasurement(
        mean=np.asarray(mean, dtype=float),
        innovation_cov=0.5 * (innovation_cov + transpose(innovation_cov)),
        cross_cov=cross_cov,
        jacobian=jacobian,
    )


class ExtendedKalmanFilter(BaseFilter):
    name = "EKF"

    def predict(
        self: ExtendedKalmanFilter, state: FilterState, model: SystemModel, u: object = None
    ) -> Prediction:
        posterior = state.belief
        propagated, jacobian = model.f_with_jacobian(posterior.mean[..., None, :], u, state.step)
        mean = propagated[..., 0, :]
        cov = linearized_covariance(jacobian, posterior.cov, model.Q)
        return Prediction(belief=GaussianBelief(mean=mean, cov=cov), step=state.step + 1)

    def predict_measurement(
        self: ExtendedKalmanFilter, prediction: Prediction, model: SystemModel
    ) -> PredictedMeasurement:
        return linearized_measurement(prediction.belief, model, prediction.step)


def ekf_step(
    state: FilterState,
    model: SystemModel,
    u: object,
    y: FloatArray,
    joseph_form: bool = True,
    condition_limit: float = 1e12,
) -> FilterState:
    return ExtendedKalmanFilter(joseph_form=joseph_form, condition_limit=condition_limit).step(
        state, model, u, y
    )
