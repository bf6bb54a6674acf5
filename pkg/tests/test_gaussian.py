import numpy as np
import pytest
from scipy import stats

from hybridkf.exceptions import CardinalityError, NotPositiveSemiDefiniteError
from hybridkf.gaussian import (
    GaussianBelief,
    UtParams,
    gaussian_logpdf,
    matrix_sqrt,
    nearest_psd,
    sample_gaussian,
    spherical_simplex_points,
    symmetric_sigma_points,
    unscented_covariance,
    unscented_cross_covariance,
    unscented_mean,
)
from hybridkf.instrument import count_calls


class TestGaussianBelief:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            GaussianBelief(mean=[0.0, 1.0], cov=np.eye(3))

    def test_covariance_is_symmetrized(self):
        belief = GaussianBelief(mean=[0.0, 0.0], cov=[[1.0, 0.2], [0.4, 1.0]])
        np.testing.assert_array_equal(belief.cov, belief.cov.T)
        assert belief.cov[0, 1] == pytest.approx(0.3)

    def test_arrays_are_read_only(self):
        belief = GaussianBelief(mean=[0.0], cov=[[1.0]])
        with pytest.raises(ValueError):
            belief.mean[0] = 1.0

    def test_scaled(self):
        belief = GaussianBelief(mean=[0.5], cov=[[2.0]]).scaled(0.1)
        assert belief.cov[0, 0] == pytest.approx(0.02)
        assert belief.mean[0] == 0.5


class TestUtParams:
    def test_default_spread(self):
        assert UtParams().spread(1) == 2.0
        assert UtParams().spread(3) == 0.0

    def test_non_positive_spread(self):
        with pytest.raises(ValueError):
            UtParams(lambda_=-3.0).spread(3)

    def test_simplex_weight_range(self):
        with pytest.raises(ValueError):
            UtParams(w0_simplex=1.0)


class TestMatrixSqrt:
    def test_factorizes(self, random_cov):
        cov = random_cov(4)
        root = matrix_sqrt(cov)
        np.testing.assert_allclose(root @ root.T, cov, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(root, np.tril(root))

    def test_singular_psd_uses_jitter(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        root = matrix_sqrt(cov)
        np.testing.assert_allclose(root @ root.T, cov, atol=1e-6)

    def test_indefinite_reports_leading_minor(self):
        with pytest.raises(NotPositiveSemiDefiniteError) as err:
            matrix_sqrt(np.diag([1.0, -1.0]))
        assert err.value.leading_minor == 2

    def test_batched(self, random_cov):
        covs = np.stack([random_cov(3) for _ in range(5)])
        roots = matrix_sqrt(covs)
        np.testing.assert_allclose(roots @ np.swapaxes(roots, -1, -2), covs, atol=1e-12)

    def test_counts_one_per_matrix(self, random_cov):
        covs = np.stack([random_cov(2) for _ in range(7)])
        with count_calls() as counts:
            matrix_sqrt(covs)
        assert counts.cholesky == 7


def test_nearest_psd_keeps_psd_input(random_cov):
    cov = random_cov(3)
    np.testing.assert_allclose(nearest_psd(cov), cov)


def test_nearest_psd_clips_negative_eigenvalues():
    repaired = nearest_psd(np.diag([1.0, -0.5]))
    assert np.linalg.eigvalsh(repaired).min() >= 0.0
    assert repaired[0, 0] == pytest.approx(1.0)


class TestSymmetricSigmaPoints:
    def test_reproduce_moments(self, rng, random_cov):
        cov = random_cov(3)
        belief = GaussianBelief(mean=rng.standard_normal(3), cov=cov)
        sigma_set = symmetric_sigma_points(belief, UtParams(lambda_=1.0))
        assert sigma_set.size == 7
        assert sigma_set.mean_weights.sum() == pytest.approx(1.0)
        mean = unscented_mean(sigma_set, sigma_set.points)
        np.testing.assert_allclose(mean, belief.mean, atol=1e-12)
        np.testing.assert_allclose(
            unscented_covariance(sigma_set, sigma_set.points, mean), cov, atol=1e-12
        )

    def test_center_comes_first(self):
        belief = GaussianBelief(mean=[2.0, -1.0], cov=np.eye(2))
        sigma_set = symmetric_sigma_points(belief, UtParams())
        np.testing.assert_array_equal(sigma_set.center, belief.mean)

    def test_square_of_standard_normal(self):
        belief = GaussianBelief(mean=[0.0], cov=[[1.0]])
        sigma_set = symmetric_sigma_points(belief, UtParams())
        squared = sigma_set.points**2
        mean = unscented_mean(sigma_set, squared)
        assert mean[0] == pytest.approx(1.0)
        assert unscented_covariance(sigma_set, squared, mean)[0, 0] == pytest.approx(2.0)

    def test_zero_spread_covariance_of_square(self):
        belief = GaussianBelief(mean=[0.0], cov=[[1.0]])
        sigma_set = symmetric_sigma_points(belief, UtParams(lambda_=0.0))
        squared = sigma_set.points**2
        mean = unscented_mean(sigma_set, squared)
        assert mean[0] == pytest.approx(1.0)
        spread = unscented_covariance(sigma_set, squared, mean)
        assert spread[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_batched_points(self, random_cov):
        belief = GaussianBelief(
            mean=np.zeros((4, 2)), cov=np.stack([random_cov(2) for _ in range(4)])
        )
        sigma_set = symmetric_sigma_points(belief, UtParams())
        assert sigma_set.points.shape == (4, 5, 2)
        mean = unscented_mean(sigma_set, sigma_set.points)
        np.testing.assert_allclose(mean, belief.mean, atol=1e-12)


class TestSphericalSimplexPoints:
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_reproduce_moments(self, n, rng, random_cov):
        cov = random_cov(n)
        belief = GaussianBelief(mean=rng.standard_normal(n), cov=cov)
        sigma_set = spherical_simplex_points(belief, UtParams(w0_simplex=0.3))
        assert sigma_set.size == n + 2
        assert sigma_set.mean_weights.sum() == pytest.approx(1.0)
        mean = unscented_mean(sigma_set, sigma_set.points)
        np.testing.assert_allclose(mean, belief.mean, atol=1e-10)
        np.testing.assert_allclose(
            unscented_covariance(sigma_set, sigma_set.points, mean), cov, atol=1e-10
        )


def test_cardinality_mismatch():
    belief = GaussianBelief(mean=[0.0, 0.0], cov=np.eye(2))
    sigma_set = symmetric_sigma_points(belief, UtParams())
    with pytest.raises(CardinalityError):
        unscented_mean(sigma_set, np.zeros((4, 2)))
    with pytest.raises(CardinalityError):
        unscented_cross_covariance(sigma_set, belief.mean, np.zeros((3, 1)), np.zeros(1))


def test_cross_covariance_of_linear_map(random_cov):
    cov = random_cov(3)
    matrix = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 1.0]])
    belief = GaussianBelief(mean=[0.1, 0.2, 0.3], cov=cov)
    sigma_set = symmetric_sigma_points(belief, UtParams())
    transformed = sigma_set.points @ matrix.T
    mean = unscented_mean(sigma_set, transformed)
    cross = unscented_cross_covariance(sigma_set, belief.mean, transformed, mean)
    np.testing.assert_allclose(cross, cov @ matrix.T, atol=1e-12)


def test_gaussian_logpdf_matches_scipy(rng, random_cov):
    cov = random_cov(3)
    mean = rng.standard_normal(3)
    x = rng.standard_normal((6, 3))
    expected = stats.multivariate_normal(mean=mean, cov=cov).logpdf(x)
    np.testing.assert_allclose(gaussian_logpdf(x, mean, cov), expected, rtol=1e-10)


def test_sample_gaussian_moments(rng):
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    belief = GaussianBelief(
        mean=np.broadcast_to([1.0, -1.0], (50_000, 2)), cov=np.broadcast_to(cov, (50_000, 2, 2))
    )
    samples = sample_gaussian(belief, rng)
    np.testing.assert_allclose(samples.mean(axis=0), [1.0, -1.0], atol=0.03)
    np.testing.assert_allclose(np.cov(samples.T), cov, atol=0.05)
