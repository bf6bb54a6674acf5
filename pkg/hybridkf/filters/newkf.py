from __future__ import annotations

__all__ = ["HybridKalmanFilter", "newkf_step"]

from hybridkf.filters._base import (
    BaseFilter,
    FilterState,
    PredictedMeasurement,
    Prediction,
    linearized_covariance,
)
from hybridkf.filters.ekf import linearized_measurement
from hybridkf.gaussian import (
    FloatArray,
    GaussianBelief,
    UtParams,
    symmetric_sigma_points,
    unscented_mean,
)
from hybridkf.systems import SystemModel


class HybridKalmanFilter(BaseFilter):
    """Unscented-transform means with linearized covariances.

    The sigma points are drawn once per step from the posterior. The predicted measurement is
    the weighted mean of h over the f-propagated points, unless `redraw` asks for fresh points
    from the predicted belief. Every covariance, the innovation covariance included, comes from
    the Jacobians of f at the posterior mean and of h at the predicted mean.
    """

    name = "NewKF"

    def __init__(
        self: HybridKalmanFilter,
        ut: UtParams | None = None,
        joseph_form: bool = True,
        condition_limit: float = 1e12,
        redraw: bool = False,
    ):
        super().__init__(ut=ut, joseph_form=joseph_form, condition_limit=condition_limit)
        self.redraw = redraw

    def predict(
        self: HybridKalmanFilter, state: FilterState, model: SystemModel, u: object = None
    ) -> Prediction:
        posterior = state.belief
        sigma_set = symmetric_sigma_points(posterior, self.ut)
        propagated, jacobian = model.f_with_jacobian(sigma_set.points, u, state.step)
        return Prediction(
            belief=GaussianBelief(
                mean=unscented_mean(sigma_set, propagated),
                cov=linearized_covariance(jacobian, posterior.cov, model.Q),
            ),
            step=state.step + 1,
            sigma_set=sigma_set,
            propagated=propagated,
        )

    def predict_measurement(
        self: HybridKalmanFilter, prediction: Prediction, model: SystemModel
    ) -> PredictedMeasurement:
        if self.redraw or prediction.propagated is None:
            sigma_set = symmetric_sigma_points(prediction.belief, self.ut)
            points = sigma_set.points
        else:
            sigma_set = prediction.sigma_set
            points = prediction.propagated
        mean = unscented_mean(sigma_set, model.h(points, prediction.step))
        return linearized_measurement(prediction.belief, model, prediction.step, mean=mean)


def newkf_step(
    state: FilterState,
    model: SystemModel,
    u: object,
    y: FloatArray,
    params: UtParams | None = None,
    joseph_form: bool = True,
    condition_limit: float = 1e12,
) -> FilterState:
    return HybridKalmanFilter(
        ut=params, joseph_form=joseph_form, condition_limit=condition_limit
    ).step(state, model, u, y)
