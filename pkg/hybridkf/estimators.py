from __future__ import annotations

__all__ = [
    "Estimator",
    "KalmanEstimator",
    "ParticleEstimator",
    "build_estimator",
    "proposal_for",
]

import logging
from abc import ABC, abstractmethod

import numpy as np

from hybridkf.filters import BaseFilter, FilterState, get_filter
from hybridkf.gaussian import FloatArray, GaussianBelief, UtParams
from hybridkf.particles import ParticleEnsemble, ParticleFilter, ProposalKind
from hybridkf.settings import FilterKind, FilterSettings, ParticleSettings, UtSettings
from hybridkf.systems import SystemModel

LOGGER = logging.getLogger(__name__)

_PROPOSALS = {
    FilterKind.PF: ProposalKind.PRIOR,
    FilterKind.PF_EKF: ProposalKind.EKF,
    FilterKind.PF_UKF: ProposalKind.UKF,
    FilterKind.PF_NEWKF: ProposalKind.NEWKF,
}


def proposal_for(kind: FilterKind) -> ProposalKind:
    try:
        return _PROPOSALS[kind]
    except KeyError:
        raise ValueError(f"{kind} isn't a particle filter") from None


class Estimator(ABC):
    """A filter bound to a model, advanced one measurement at a time."""

    def __init__(self: Estimator, kind: FilterKind, model: SystemModel):
        self.kind = kind
        self.model = model

    @property
    def name(self: Estimator) -> str:
        return str(self.kind)

    @abstractmethod
    def reset(
        self: Estimator, belief: GaussianBelief, rng: np.random.Generator | None = None
    ) -> None: ...

    @abstractmethod
    def advance(self: Estimator, u: object, y: FloatArray) -> None: ...

    @property
    @abstractmethod
    def mean(self: Estimator) -> FloatArray: ...

    @property
    @abstractmethod
    def variance(self: Estimator) -> FloatArray: ...


class KalmanEstimator(Estimator):
    def __init__(self: KalmanEstimator, kind: FilterKind, model: SystemModel, kalman: BaseFilter):
        super().__init__(kind=kind, model=model)
        self.kalman = kalman
        self.state: FilterState | None = None

    def reset(
        self: KalmanEstimator,
        belief: GaussianBelief,
        rng: np.random.Generator | None = None,  # noqa: ARG002
    ) -> None:
        self.state = FilterState(belief=belief, step=0)

    def advance(self: KalmanEstimator, u: object, y: FloatArray) -> None:
        self.state = self.kalman.step(self._current(), self.model, u, y)

    def _current(self: KalmanEstimator) -> FilterState:
        if self.state is None:
            raise RuntimeError(f"{self.name} hasn't been reset")
        return self.state

    @property
    def mean(self: KalmanEstimator) -> FloatArray:
        return self._current().belief.mean

    @property
    def variance(self: KalmanEstimator) -> FloatArray:
        return np.diagonal(self._current().belief.cov).copy()

    @property
    def belief(self: KalmanEstimator) -> GaussianBelief:
        return self._current().belief


class ParticleEstimator(Estimator):
    def __init__(
        self: ParticleEstimator,
        kind: FilterKind,
        model: SystemModel,
        particle_filter: ParticleFilter,
    ):
        super().__init__(kind=kind, model=model)
        self.particle_filter = particle_filter
        self.ensemble: ParticleEnsemble | None = None
        self.rng: np.random.Generator | None = None

    def reset(
        self: ParticleEstimator,
        belief: GaussianBelief,
        rng: np.random.Generator | None = None,
    ) -> None:
        if rng is None:
            raise ValueError(f"{self.name} needs a random generator")
        self.rng = rng
        self.ensemble = self.particle_filter.initialize(belief, rng)

    def advance(self: ParticleEstimator, u: object, y: FloatArray) -> None:
        self.ensemble = self.particle_filter.step(self._current(), self.model, u, y, self.rng)

    def _current(self: ParticleEstimator) -> ParticleEnsemble:
        if self.ensemble is None:
            raise RuntimeError(f"{self.name} hasn't been reset")
        return self.ensemble

    @property
    def mean(self: ParticleEstimator) -> FloatArray:
        return self._current().mean

    @property
    def variance(self: ParticleEstimator) -> FloatArray:
        return self._current().variance


def build_estimator(
    kind: FilterKind,
    model: SystemModel,
    filter_settings: FilterSettings | None = None,
    ut: UtSettings | None = None,
    particles: ParticleSettings | None = None,
) -> Estimator:
    filter_settings = filter_settings or FilterSettings()
    ut = ut or UtSettings()
    if not kind.is_particle:
        return KalmanEstimator(
            kind=kind, model=model, kalman=get_filter(kind, settings=filter_settings, ut=ut)
        )
    particles = particles or ParticleSettings()
    particle_filter = ParticleFilter(
        proposal=proposal_for(kind),
        count=particles.count,
        proposal_variance=particles.p0,
        resample_threshold=particles.resample_threshold,
        ut=UtParams(lambda_=ut.lambda_, w0_simplex=ut.w0_simplex),
        joseph_form=filter_settings.joseph_form,
        prior_share=particles.prior_share,
        redraw=filter_settings.newkf_redraw,
    )
    return ParticleEstimator(kind=kind, model=model, particle_filter=particle_filter)
