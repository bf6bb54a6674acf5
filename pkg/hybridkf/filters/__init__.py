__all__ = [
    "BaseFilter",
    "ExtendedKalmanFilter",
    "FilterState",
    "HybridKalmanFilter",
    "PredictedMeasurement",
    "Prediction",
    "SinglePointUKF",
    "SphericalSimplexUKF",
    "UnscentedKalmanFilter",
    "ekf_step",
    "get_filter",
    "kalman_gain",
    "linearized_covariance",
    "newkf_step",
    "spukf_step",
    "ssukf_step",
    "ukf_step",
]

from hybridkf.filters._base import (
    BaseFilter,
    FilterState,
    PredictedMeasurement,
    Prediction,
    kalman_gain,
    linearized_covariance,
)
from hybridkf.filters.ekf import ExtendedKalmanFilter, ekf_step
from hybridkf.filters.newkf import HybridKalmanFilter, newkf_step
from hybridkf.filters.spukf import SinglePointUKF, spukf_step
from hybridkf.filters.ssukf import SphericalSimplexUKF, ssukf_step
from hybridkf.filters.ukf import UnscentedKalmanFilter, ukf_step
from hybridkf.gaussian import UtParams
from hybridkf.settings import FilterKind, FilterSettings, UtSettings


def get_filter(
    kind: FilterKind, settings: FilterSettings | None = None, ut: UtSettings | None = None
) -> BaseFilter:
    settings = settings or FilterSettings()
    ut = ut or UtSettings()
    params = UtParams(lambda_=ut.lambda_, w0_simplex=ut.w0_simplex)
    options = {
        "ut": params,
        "joseph_form": settings.joseph_form,
        "condition_limit": settings.condition_limit,
    }
    if kind == FilterKind.EKF:
        return ExtendedKalmanFilter(**options)
    if kind == FilterKind.UKF:
        return UnscentedKalmanFilter(**options)
    if kind == FilterKind.NEWKF:
        return HybridKalmanFilter(**options, redraw=settings.newkf_redraw)
    if kind == FilterKind.SPUKF:
        return SinglePointUKF(**options)
    if kind == FilterKind.SSUKF:
        return SphericalSimplexUKF(**options)
    raise NotImplementedError(f"{kind} isn't a Kalman-type filter")
