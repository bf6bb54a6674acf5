from __future__ import annotations

__all__ = ["SphericalSimplexUKF", "ssukf_step"]

from hybridkf.filters._base import FilterState
from hybridkf.filters.ukf import UnscentedKalmanFilter
from hybridkf.gaussian import (
    FloatArray,
    GaussianBelief,
    SigmaPointSet,
    UtParams,
    spherical_simplex_points,
)
from hybridkf.systems import SystemModel


class SphericalSimplexUKF(UnscentedKalmanFilter):
    """UKF on the n+2 point spherical-simplex set."""

    name = "SSUKF"

    def sigma_points(self: SphericalSimplexUKF, belief: GaussianBelief) -> SigmaPointSet:
        return spherical_simplex_points(belief, self.ut)


def ssukf_step(
    state: FilterState,
    model: SystemModel,
    u: object,
    y: FloatArray,
    params: UtParams | None = None,
    condition_limit: float = 1e12,
) -> FilterState:
    return SphericalSimplexUKF(ut=params, condition_limit=condition_limit).step(
        state, model, u, y
    )
