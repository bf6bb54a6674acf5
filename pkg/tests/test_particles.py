import numpy as np
import pytest
from scipy import stats

from hybridkf.estimators import ParticleEstimator, build_estimator, proposal_for
from hybridkf.exceptions import NormalizationError, ParticleDegeneracyError
from hybridkf.filters import FilterState, HybridKalmanFilter, get_filter
from hybridkf.gaussian import GaussianBelief
from hybridkf.particles import (
    ParticleEnsemble,
    ParticleFilter,
    ProposalKind,
    effective_sample_size,
    gamma_sample,
    kf_proposal,
    pf_step,
    systematic_resample,
)
from hybridkf.settings import FilterKind, FilterSettings, ParticleSettings
from hybridkf.systems import FunctionalModel, LinearModel, TimeSeriesModel, polynomial_test_model


class TestGammaSample:
    def test_moments(self, rng):
        samples = gamma_sample(2.0, 3.0, rng, size=200_000)
        assert samples.mean() == pytest.approx(6.0, rel=0.01)
        assert samples.var() == pytest.approx(18.0, rel=0.03)

    def test_distribution(self, rng):
        samples = gamma_sample(2.0, 3.0, rng, size=5_000)
        assert stats.kstest(samples, "gamma", args=(2.0, 0.0, 3.0)).pvalue > 0.001

    @pytest.mark.parametrize(("shape", "scale"), [(0.0, 1.0), (1.0, -1.0)])
    def test_invalid_parameters(self, shape, scale, rng):
        with pytest.raises(ValueError):
            gamma_sample(shape, scale, rng)


class TestSystematicResample:
    @pytest.mark.parametrize(
        ("u0", "expected"), [(0.01, [0, 1, 2, 3]), (0.5, [1, 2, 3, 3]), (0.99, [1, 2, 3, 3])]
    )
    def test_examples(self, u0, expected):
        indices = systematic_resample(np.array([0.1, 0.2, 0.3, 0.4]), u0)
        np.testing.assert_array_equal(indices, expected)

    def test_other_count(self):
        indices = systematic_resample(np.array([0.5, 0.5]), 0.3, count=6)
        np.testing.assert_array_equal(indices, [0, 0, 0, 1, 1, 1])

    def test_expected_counts_follow_weights(self):
        weights = np.array([0.1, 0.2, 0.3, 0.4])
        grid = (np.arange(1000) + 0.5) / 1000
        counts = np.mean(
            [np.bincount(systematic_resample(weights, u0), minlength=4) for u0 in grid], axis=0
        )
        np.testing.assert_allclose(counts, 4 * weights, atol=0.01)

    @pytest.mark.parametrize("weights", [[0.5, 0.6], [1.2, -0.2]])
    def test_unnormalized_weights(self, weights):
        with pytest.raises(NormalizationError):
            systematic_resample(np.array(weights), 0.5)

    def test_offset_range(self):
        with pytest.raises(ValueError):
            systematic_resample(np.array([0.5, 0.5]), 1.0)

    def test_two_equal_weights_into_four(self):
        indices = systematic_resample(np.array([0.5, 0.5]), 0.1, count=4)
        np.testing.assert_array_equal(indices, [0, 0, 1, 1])

    def test_single_heavy_weight(self):
        indices = systematic_resample(np.array([1.0, 0.0, 0.0, 0.0]), 0.7)
        np.testing.assert_array_equal(indices, [0, 0, 0, 0])

    @pytest.mark.parametrize("u0", [0.0, 0.5, 0.9])
    def test_uniform_weights_keep_every_particle(self, u0):
        indices = systematic_resample(np.full(4, 0.25), u0)
        np.testing.assert_array_equal(indices, [0, 1, 2, 3])


def test_effective_sample_size():
    assert effective_sample_size(np.full(50, 0.02)) == pytest.approx(50.0)
    assert effective_sample_size(np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)


@pytest.fixture
def scalar_model():
    return LinearModel(A=[[0.9]], C=[[1.0]], process_cov=[[0.1]], measurement_cov=[[0.1]])


class TestParticleFilter:
    @pytest.mark.parametrize("proposal", [ProposalKind.PRIOR, ProposalKind.EKF, ProposalKind.NEWKF])
    def test_tracks_the_kalman_filter_on_a_linear_model(self, proposal, scalar_model):
        belief = GaussianBelief(mean=[0.0], cov=[[1.0]])
        simulation = scalar_model.simulate([0.0], 50, np.random.default_rng(5))
        particle_filter = ParticleFilter(proposal=proposal, count=1000)
        rng = np.random.default_rng(6)
        ensemble = particle_filter.initialize(belief, rng)
        kalman = get_filter(FilterKind.EKF)
        state = FilterState(belief=belief)
        for y in simulation.measurements:
            ensemble = particle_filter.step(ensemble, scalar_model, None, y, rng)
            state = kalman.step(state, scalar_model, None, y)
            assert ensemble.weights.sum() == pytest.approx(1.0)
            assert ensemble.mean[0] == pytest.approx(state.belief.mean[0], abs=0.1)

    def test_names(self):
        assert ParticleFilter().name == "PF"
        assert ParticleFilter(proposal=ProposalKind.EKF).name == "PF-EKF"
        assert ParticleFilter(proposal=ProposalKind.NEWKF).name == "PF-NewKF"

    def test_kalman_proposals_need_covariances(self, scalar_model, rng):
        ensemble = ParticleEnsemble.from_belief(GaussianBelief(mean=[0.0], cov=[[1.0]]), 10, rng)
        with pytest.raises(ValueError):
            pf_step(ensemble, scalar_model, np.array([0.0]), ProposalKind.UKF, rng)

    def test_degenerate_likelihood(self, rng):
        model = FunctionalModel(
            transition=lambda x, u, t: x,
            measurement=lambda x, t: np.full(x.shape, np.nan),
            process_cov=[[0.1]],
            measurement_cov=[[0.1]],
        )
        ensemble = ParticleEnsemble.from_belief(GaussianBelief(mean=[0.0], cov=[[1.0]]), 20, rng)
        with pytest.raises(ParticleDegeneracyError):
            pf_step(ensemble, model, np.array([0.0]), ProposalKind.PRIOR, rng)

    def test_resampling_resets_weights(self, scalar_model, rng):
        ensemble = ParticleEnsemble.from_belief(GaussianBelief(mean=[0.0], cov=[[4.0]]), 200, rng)
        stepped = pf_step(
            ensemble, scalar_model, np.array([3.0]), ProposalKind.PRIOR, rng, resample_threshold=1.0
        )
        assert stepped.resampled
        np.testing.assert_allclose(stepped.weights, np.full(200, 1 / 200))
        assert stepped.step == 1

    @pytest.fixture
    def stranded(self):
        # Particles far above a truth the quadratic measurement pins near 7.6: the linearized
        # update lands below f(x) minus the Gamma mean, where the drive would be negative.
        count = 200
        return ParticleEnsemble(
            particles=np.full((count, 1), 32.0),
            weights=np.full(count, 1.0 / count),
            covs=np.full((count, 1, 1), 1e-6),
            step=20,
        )

    def test_kalman_proposal_mixes_in_the_prior(self, stranded, rng):
        y = np.array([0.5 * 7.588**2])
        stepped = pf_step(stranded, TimeSeriesModel(), y, ProposalKind.EKF, rng, prior_share=0.1)
        assert not stepped.prior_fallback
        assert np.all(np.isfinite(stepped.weights))
        assert stepped.weights.sum() == pytest.approx(1.0)
        assert stepped.mean[0] > 17.5

    def test_infeasible_kalman_move_falls_back_to_the_prior(self, stranded, rng):
        y = np.array([0.5 * 7.588**2])
        stepped = pf_step(stranded, TimeSeriesModel(), y, ProposalKind.EKF, rng, prior_share=0.0)
        assert stepped.prior_fallback
        assert np.all(np.isfinite(stepped.weights))
        assert stepped.weights.sum() == pytest.approx(1.0)
        assert np.all(stepped.particles[:, 0] > 17.5)
        assert stepped.step == 21

    @pytest.mark.parametrize("share", [-0.1, 1.0])
    def test_prior_share_range(self, share, scalar_model, rng):
        ensemble = ParticleEnsemble.from_belief(GaussianBelief(mean=[0.0], cov=[[1.0]]), 10, rng)
        with pytest.raises(ValueError):
            pf_step(
                ensemble, scalar_model, np.array([0.0]), ProposalKind.PRIOR, rng, prior_share=share
            )
        with pytest.raises(ValueError):
            ParticleFilter(prior_share=share)


def test_error_halves_when_particles_quadruple():
    # One step of x1 = x0 + w with x0, w, v ~ N(0, 1): E[x1 | y1 = 1] = 2/3.
    model = LinearModel(A=[[1.0]], C=[[1.0]], process_cov=[[1.0]], measurement_cov=[[1.0]])
    belief = GaussianBelief(mean=[0.0], cov=[[1.0]])
    y = np.array([1.0])

    def rmse(count: int) -> float:
        particle_filter = ParticleFilter(count=count)
        errors = []
        for seed in range(400):
            rng = np.random.default_rng(seed)
            ensemble = particle_filter.step(
                particle_filter.initialize(belief, rng), model, None, y, rng
            )
            errors.append(ensemble.mean[0] - 2.0 / 3.0)
        return float(np.sqrt(np.mean(np.square(errors))))

    assert 1.4 <= rmse(200) / rmse(800) <= 2.6


class TestKalmanProposal:
    def test_kalman_kinds_agree_on_a_linear_model(self, scalar_model):
        particles = np.array([[0.5], [-1.0], [2.0]])
        covs = np.full((3, 1, 1), 0.2)
        y = np.array([0.4])
        reference, _ = kf_proposal(particles, covs, scalar_model, y, ProposalKind.EKF)
        for kind in (ProposalKind.UKF, ProposalKind.NEWKF):
            proposals, fallback = kf_proposal(particles, covs, scalar_model, y, kind)
            assert not fallback.any()
            np.testing.assert_allclose(proposals.mean, reference.mean, atol=1e-8)
            np.testing.assert_allclose(proposals.cov, reference.cov, atol=1e-8)

    def test_uninformative_measurement_keeps_the_prediction(self):
        model = LinearModel(A=[[0.9]], C=[[1.0]], process_cov=[[0.1]], measurement_cov=[[1e12]])
        particles = np.array([[1.0], [2.0]])
        covs = np.full((2, 1, 1), 0.5)
        proposals, _ = kf_proposal(particles, covs, model, np.array([3.0]), ProposalKind.EKF)
        np.testing.assert_allclose(proposals.mean, [[0.9], [1.8]], atol=1e-9)
        np.testing.assert_allclose(proposals.cov, np.full((2, 1, 1), 0.505), rtol=1e-9)

    def test_redraw_reaches_the_hybrid_filter(self):
        model = TimeSeriesModel()
        particles = np.array([[3.0]])
        covs = np.full((1, 1, 1), 0.7)
        y = np.array([20.0])
        proposals, _ = kf_proposal(particles, covs, model, y, ProposalKind.NEWKF, redraw=True)
        expected = HybridKalmanFilter(redraw=True).step(
            FilterState(belief=GaussianBelief(mean=[3.0], cov=[[0.7]])), model, None, y
        )
        np.testing.assert_allclose(proposals.mean[0], expected.belief.mean, rtol=1e-12)
        single_draw, _ = kf_proposal(particles, covs, model, y, ProposalKind.NEWKF)
        assert single_draw.mean[0, 0] != pytest.approx(proposals.mean[0, 0], rel=1e-9)

    def test_failing_particles_fall_back_to_the_prior(self):
        model = polynomial_test_model(2, [1.0, 0.0, 0.0], process_var=0.1, measurement_var=0.0)
        particles = np.array([[0.0], [1.0], [2.0]])
        covs = np.full((3, 1, 1), 0.1)
        proposals, fallback = kf_proposal(
            particles, covs, model, np.array([1.0]), ProposalKind.EKF
        )
        np.testing.assert_array_equal(fallback, [True, False, False])
        assert proposals.mean[0, 0] == 0.0
        assert proposals.cov[0, 0, 0] == pytest.approx(0.1)

    def test_batched_proposal_matches_single_filter(self, scalar_model):
        particles = np.array([[0.5], [-1.0]])
        covs = np.full((2, 1, 1), 0.2)
        proposals, fallback = kf_proposal(
            particles, covs, scalar_model, np.array([0.4]), ProposalKind.UKF
        )
        assert not fallback.any()
        single = get_filter(FilterKind.UKF).step(
            FilterState(belief=GaussianBelief(mean=[-1.0], cov=[[0.2]])),
            scalar_model,
            None,
            np.array([0.4]),
        )
        np.testing.assert_allclose(proposals.mean[1], single.belief.mean, atol=1e-12)
        np.testing.assert_allclose(proposals.cov[1], single.belief.cov, atol=1e-12)


class TestParticleEstimator:
    def test_build(self, scalar_model):
        estimator = build_estimator(
            FilterKind.PF_UKF, scalar_model, particles=ParticleSettings(count=30)
        )
        assert isinstance(estimator, ParticleEstimator)
        assert estimator.particle_filter.count == 30
        assert estimator.name == "PF-UKF"

    def test_build_passes_proposal_options(self, scalar_model):
        estimator = build_estimator(
            FilterKind.PF_NEWKF,
            scalar_model,
            filter_settings=FilterSettings(newkf_redraw=True),
            particles=ParticleSettings(count=30, prior_share=0.25),
        )
        assert estimator.particle_filter.redraw
        assert estimator.particle_filter.prior_share == 0.25
        assert not build_estimator(FilterKind.PF_NEWKF, scalar_model).particle_filter.redraw

    def test_reset_needs_a_generator(self, scalar_model):
        estimator = build_estimator(FilterKind.PF, scalar_model)
        with pytest.raises(ValueError):
            estimator.reset(GaussianBelief(mean=[0.0], cov=[[1.0]]))

    def test_proposal_mapping(self):
        assert proposal_for(FilterKind.PF) == ProposalKind.PRIOR
        assert proposal_for(FilterKind.PF_NEWKF) == ProposalKind.NEWKF
        with pytest.raises(ValueError):
            proposal_for(FilterKind.UKF)
