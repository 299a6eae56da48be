"""Tests for the Frechet distance."""

import numpy as np
import pytest

from src.errors import InvalidArgumentError
from src.metrics.fid import GaussianMoments, fid, frechet_distance, gaussian_moments, trace_sqrt_product


class TestFrechetDistance:
    def test_diagonal_closed_form(self):
        a = GaussianMoments(mean=np.zeros(2), cov=np.diag([1.0, 4.0]))
        b = GaussianMoments(mean=np.ones(2), cov=np.diag([4.0, 1.0]))
        # |mu1 - mu2|^2 + sum (sqrt(s1) - sqrt(s2))^2
        assert frechet_distance(a, b) == pytest.approx(2.0 + 1.0 + 1.0)
        assert frechet_distance(b, a) == pytest.approx(frechet_distance(a, b))

    def test_trace_sqrt_of_commuting_covariances(self):
        assert trace_sqrt_product(np.diag([1.0, 9.0]), np.diag([4.0, 1.0])) == pytest.approx(2.0 + 3.0)

    def test_identical_features_give_zero(self):
        x = np.random.default_rng(0).normal(size=(200, 5))
        assert fid(x, x) == pytest.approx(0.0, abs=1e-6)

    def test_shift_adds_squared_norm(self):
        x = np.random.default_rng(1).normal(size=(300, 3))
        shift = np.array([1.0, -2.0, 0.5])
        assert fid(x, x + shift) == pytest.approx(float(shift @ shift), abs=1e-6)

    def test_never_negative(self):
        rng = np.random.default_rng(2)
        assert fid(rng.normal(size=(10, 20)), rng.normal(size=(10, 20))) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            fid(np.zeros((4, 2)), np.zeros((4, 3)))

    def test_needs_two_samples(self):
        with pytest.raises(InvalidArgumentError):
            gaussian_moments(np.zeros((1, 3)))

    def test_shrinkage_on_diagonal(self):
        moments = gaussian_moments(np.array([[0.0, 1.0], [2.0, 1.0]]), shrinkage=0.5)
        assert moments.cov[1, 1] == pytest.approx(0.5)
        assert moments.count == 2


class TestExactMoments:
    def test_unit_variance_shift_in_one_dim(self):
        a = GaussianMoments(mean=np.array([0.0]), cov=np.array([[1.0]]))
        b = GaussianMoments(mean=np.array([1.0]), cov=np.array([[1.0]]))
        assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_isotropic_scale_and_shift(self):
        a = GaussianMoments(mean=np.zeros(2), cov=np.eye(2))
        b = GaussianMoments(mean=np.array([1.0, 0.0]), cov=4.0 * np.eye(2))
        # 1 + (2 + 8) - 2 * tr(2 I)
        assert frechet_distance(a, b) == pytest.approx(3.0, abs=1e-9)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_symmetric_for_non_commuting_covariances(self, seed):
        rng = np.random.default_rng(seed)
        m1, m2 = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        a = GaussianMoments(mean=rng.normal(size=4), cov=m1 @ m1.T + np.eye(4))
        b = GaussianMoments(mean=rng.normal(size=4), cov=m2 @ m2.T + 0.5 * np.eye(4))
        assert not np.allclose(a.cov @ b.cov, b.cov @ a.cov)
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), abs=1e-8)

    def test_same_distribution_bias_shrinks_with_sample_size(self):
        rng = np.random.default_rng(4)
        means = []
        for n in (100, 1000, 10000):
            draws = [fid(rng.normal(size=(n, 2)), rng.normal(size=(n, 2))) for _ in range(20)]
            means.append(float(np.mean(draws)))
        assert means[0] > means[1] > means[2] >= 0.0
