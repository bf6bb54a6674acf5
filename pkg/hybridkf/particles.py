from __future__ import annotations

__all__ = [
    "ParticleEnsemble",
    "ParticleFilter",
    "ProposalKind",
    "effective_sample_size",
    "gamma_sample",
    "kf_proposal",
    "pf_step",
    "systematic_resample",
]

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from hybridkf.exceptions import (
    HybridKFError,
    NormalizationError,
    ParticleDegeneracyError,
)
from hybridkf.filters import (
    BaseFilter,
    ExtendedKalmanFilter,
    FilterState,
    HybridKalmanFilter,
    UnscentedKalmanFilter,
)
from hybridkf.gaussian import FloatArray, GaussianBelief, UtParams, gaussian_logpdf, sample_gaussian
from hybridkf.settings import SettingsEnum
from hybridkf.systems import SystemModel

LOGGER = logging.getLogger(__name__)


class ProposalKind(SettingsEnum):
    PRIOR = "prior"
    EKF = "EKF"
    UKF = "UKF"
    NEWKF = "NewKF"


def gamma_sample(
    shape: float,
    scale: float,
    rng: np.random.Generator,
    size: int | tuple[int, ...] | None = None,
) -> float | FloatArray:
    """Gamma(shape, scale) draws from numpy's generator.

    numpy uses Marsaglia-Tsang squeeze rejection for shape > 1, the exponential for shape == 1
    and Johnk-style rejection below 1.
    """
    if shape <= 0 or scale <= 0:
        raise ValueError(f"Gamma shape and scale must be positive, got {shape} and {scale}")
    return rng.gamma(shape, scale, size=size)


def effective_sample_size(weights: FloatArray) -> float:
    return 1.0 / float(np.sum(np.square(weights)))


def systematic_resample(weights: FloatArray, u0: float, count: int | None = None) -> FloatArray:
    weights = np.asarray(weights, dtype=float)
    total = float(np.sum(weights))
    if np.any(weights < 0) or abs(total - 1.0) > 1e-9:
        raise NormalizationError(f"Weights must be non-negative and sum to 1, got sum {total}")
    if not 0.0 <= u0 < 1.0:
        raise ValueError(f"u0 must lie in [0, 1), got {u0}")
    count = count or weights.shape[0]
    positions = (np.arange(count) + u0) / count
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    indices = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(indices, weights.shape[0] - 1)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    particles: FloatArray
    weights: FloatArray
    covs: FloatArray | None = None
    step: int = 0
    estimate: FloatArray | None = None
    resampled: bool = False
    prior_fallback: bool = False

    @property
    def count(self: ParticleEnsemble) -> int:
        return self.particles.shape[0]

    @property
    def mean(self: ParticleEnsemble) -> FloatArray:
        if self.estimate is not None:
            return self.estimate
        return self.weights @ self.particles

    @property
    def variance(self: ParticleEnsemble) -> FloatArray:
        deviations = self.particles - self.mean
        return self.weights @ deviations**2

    @classmethod
    def from_belief(
        cls: type[ParticleEnsemble],
        belief: GaussianBelief,
        count: int,
        rng: np.random.Generator,
        proposal_variance: float | None = None,
    ) -> ParticleEnsemble:
        spread = GaussianBelief(
            mean=np.broadcast_to(belief.mean, (count, belief.n)),
            cov=np.broadcast_to(belief.cov, (count, belief.n, belief.n)),
        )
        covs = None
        if proposal_variance is not None:
            covs = np.broadcast_to(proposal_variance * np.eye(belief.n), spread.cov.shape).copy()
        return cls(
            particles=sample_gaussian(spread, rng),
            weights=np.full(count, 1.0 / count),
            covs=covs,
            estimate=belief.mean,
        )


def _proposal_filter(
    kind: ProposalKind, ut: UtParams, joseph_form: bool, redraw: bool = False
) -> BaseFilter:
    if kind == ProposalKind.EKF:
        return ExtendedKalmanFilter(ut=ut, joseph_form=joseph_form)
    if kind == ProposalKind.UKF:
        return UnscentedKalmanFilter(ut=ut, joseph_form=joseph_form)
    if kind == ProposalKind.NEWKF:
        return HybridKalmanFilter(ut=ut, joseph_form=joseph_form, redraw=redraw)
    raise ValueError(f"{kind} doesn't build a Gaussian proposal")


def _prior_proposal(
    particle: FloatArray, model: SystemModel, u: object, step: int
) -> GaussianBelief:
    return GaussianBelief(mean=model.f(particle, u, step), cov=model.Q)


def kf_proposal(
    particles: FloatArray,
    covs: FloatArray,
    model: SystemModel,
    y: FloatArray,
    kind: ProposalKind,
    params: UtParams | None = None,
    u: object = None,
    step: int = 0,
    joseph_form: bool = True,
    redraw: bool = False,
) -> tuple[GaussianBelief, FloatArray]:
    """One Kalman step per particle, seeded at (particle, cov), as the particle's proposal.

    All particles run as one batch. When the batch fails, particles are retried one at a time
    and a particle that still fails falls back to the transition prior N(f(x), Q). Returns the
    proposals and a mask of the fallback particles.
    """
    kalman = _proposal_filter(kind, params or UtParams(), joseph_form, redraw=redraw)
    particles = np.asarray(particles, dtype=float)
    fallback = np.zeros(particles.shape[0], dtype=bool)
    try:
        state = FilterState(belief=GaussianBelief(mean=particles, cov=covs), step=step)
        return kalman.step(state, model, u, y).belief, fallback
    except HybridKFError:
        LOGGER.debug("Batched %s proposal failed, retrying per particle", kind)
    means = np.empty_like(particles)
    cov_out = np.empty((*particles.shape, particles.shape[-1]))
    for index, particle in enumerate(particles):
        try:
            state = FilterState(belief=GaussianBelief(mean=particle, cov=covs[index]), step=step)
            proposal = kalman.step(state, model, u, y).belief
        except HybridKFError:
            fallback[index] = True
            proposal = _prior_proposal(particle, model, u, step)
        means[index] = proposal.mean
        cov_out[index] = proposal.cov
    if fallback.any():
        LOGGER.debug(
            "%d of %d %s proposals fell back to the transition prior",
            int(fallback.sum()),
            fallback.shape[0],
            kind,
        )
    return GaussianBelief(mean=means, cov=cov_out), fallback


def _prior_move(
    previous: FloatArray, model: SystemModel, u: object, step: int, rng: np.random.Generator
) -> FloatArray:
    return model.f(previous, u, step) + model.sample_process_noise(rng, (previous.shape[0],))


def _normalized(log_weights: FloatArray) -> tuple[FloatArray, float]:
    log_weights = np.where(np.isnan(log_weights), -np.inf, log_weights)
    return log_weights, float(logsumexp(log_weights))


def pf_step(
    ensemble: ParticleEnsemble,
    model: SystemModel,
    y: FloatArray,
    proposal: ProposalKind,
    rng: np.random.Generator,
    u: object = None,
    params: UtParams | None = None,
    resample_threshold: float = 0.5,
    joseph_form: bool = True,
    prior_share: float = 0.1,
    redraw: bool = False,
) -> ParticleEnsemble:
    """Sequential importance resampling step with log-domain weights.

    A Kalman proposal is mixed with the transition prior: each particle comes from the prior
    with probability `prior_share` and is weighted against the mixture density. When every
    weight of a Kalman move still underflows, the step is redrawn from the prior alone.
    """
    if not 0.0 <= prior_share < 1.0:
        raise ValueError(f"prior_share must lie in [0, 1), got {prior_share}")
    y = np.asarray(y, dtype=float)
    previous = ensemble.particles
    step = ensemble.step
    with np.errstate(divide="ignore"):
        log_weights = np.log(ensemble.weights)
    covs = ensemble.covs
    fallback = False
    if proposal == ProposalKind.PRIOR:
        particles = _prior_move(previous, model, u, step, rng)
        log_weights, normalizer = _normalized(
            log_weights + model.measurement_logpdf(y, particles, step + 1)
        )
    else:
        if covs is None:
            raise ValueError(f"{proposal} proposals need per-particle covariances")
        proposals, _ = kf_proposal(
            previous,
            covs,
            model,
            y,
            proposal,
            params=params,
            u=u,
            step=step,
            joseph_form=joseph_form,
            redraw=redraw,
        )
        from_prior = rng.random(ensemble.count) < prior_share
        particles = sample_gaussian(proposals, rng)
        if from_prior.any():
            particles[from_prior] = _prior_move(previous[from_prior], model, u, step, rng)
        covs = np.array(proposals.cov)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_transition = model.process_logpdf(particles, previous, u, step)
            log_proposal = gaussian_logpdf(particles, proposals.mean, proposals.cov)
            if prior_share > 0:
                log_proposal = np.logaddexp(
                    np.log1p(-prior_share) + log_proposal, np.log(prior_share) + log_transition
                )
            moved, normalizer = _normalized(
                log_weights
                + model.measurement_logpdf(y, particles, step + 1)
                + log_transition
                - log_proposal
            )
        if np.isfinite(normalizer):
            log_weights = moved
        else:
            LOGGER.debug(
                "Every %s proposal weight underflowed at step %d, redrawing from the prior",
                proposal,
                step + 1,
            )
            fallback = True
            particles = _prior_move(previous, model, u, step, rng)
            log_weights, normalizer = _normalized(
                log_weights + model.measurement_logpdf(y, particles, step + 1)
            )
    if not np.isfinite(normalizer):
        raise ParticleDegeneracyError(
            f"Every particle weight underflowed at step {step + 1}, the likelihood is degenerate"
        )
    weights = np.exp(log_weights - normalizer)
    weights = weights / weights.sum()
    estimate = weights @ particles
    resampled = effective_sample_size(weights) < resample_threshold * ensemble.count
    if resampled:
        indices = systematic_resample(weights, u0=float(rng.random()))
        particles = particles[indices]
        covs = None if covs is None else covs[indices]
        weights = np.full(ensemble.count, 1.0 / ensemble.count)
    return ParticleEnsemble(
        particles=particles,
        weights=weights,
        covs=covs,
        step=step + 1,
        estimate=estimate,
        resampled=bool(resampled),
        prior_fallback=fallback,
    )


class ParticleFilter:
    """Particle filter with a transition-prior or Kalman proposal, driven one step at a time."""

    def __init__(
        self: ParticleFilter,
        proposal: ProposalKind = ProposalKind.PRIOR,
        count: int = 200,
        proposal_variance: float = 1e-3,
        resample_threshold: float = 0.5,
        ut: UtParams | None = None,
        joseph_form: bool = True,
        prior_share: float = 0.1,
        redraw: bool = False,
    ):
        if not 0.0 <= prior_share < 1.0:
            raise ValueError(f"prior_share must lie in [0, 1), got {prior_share}")
        self.prior_share = prior_share
        self.redraw = redraw
        self.proposal = proposal
        self.count = count
        self.proposal_variance = proposal_variance
        self.resample_threshold = resample_threshold
        self.ut = ut or UtParams()
        self.joseph_form = joseph_form

    @property
    def name(self: ParticleFilter) -> str:
        return "PF" if self.proposal == ProposalKind.PRIOR else f"PF-{self.proposal}"

    def initialize(
        self: ParticleFilter, belief: GaussianBelief, rng: np.random.Generator
    ) -> ParticleEnsemble:
        variance = None if self.proposal == ProposalKind.PRIOR else self.proposal_variance
        return ParticleEnsemble.from_belief(belief, self.count, rng, proposal_variance=variance)

    def step(
        self: ParticleFilter,
        ensemble: ParticleEnsemble,
        model: SystemModel,
        u: object,
        y: FloatArray,
        rng: np.random.Generator,
    ) -> ParticleEnsemble:
        return pf_step(
            ensemble,
            model,
            y,
            self.proposal,
            rng,
            u=u,
            params=self.ut,
            resample_threshold=self.resample_threshold,
            joseph_form=self.joseph_form,
            prior_share=self.prior_share,
            redraw=self.redraw,
        )

