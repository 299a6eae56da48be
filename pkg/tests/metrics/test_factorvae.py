"""Tests for the FactorVAE score and its generator-backed factors."""

import math

import numpy as np
import pytest
import torch

from src.errors import ConfigurationError, InvalidArgumentError
from src.metrics.factorvae import (
    GeneratorFactors,
    evaluate_factorvae,
    factorvae_score,
    majority_vote_classifier,
    q_head_representation,
    train_posthoc_encoder,
    vote_accuracy,
)
from src.models import CodeKind, ModelConfig
from src.networks import ArchitectureDescriptor, build_bundle
from src.synthetic import SyntheticFactors


class GridFactors:
    """Independent uniform factors whose observations are the factor values."""

    def __init__(self, sizes=(4, 4)):
        self.factor_sizes = list(sizes)

    def sample_factors(self, n, rng):
        return np.stack([rng.integers(0, size, n) for size in self.factor_sizes], axis=1)

    def observations(self, factors):
        return torch.as_tensor(factors, dtype=torch.float64)


def identity(x):
    return x


HADAMARD = torch.tensor([[1.0, 1.0], [1.0, -1.0]], dtype=torch.float64) / math.sqrt(2)


def mixed(x):
    return x @ HADAMARD.T


SMALL = dict(batch_size=32, variance_samples=1000)


# ---------------------------------------------------------------------------
# Score
# ---------------------------------------------------------------------------

class TestFactorVAEScore:
    def test_identity_scores_one(self):
        assert factorvae_score(identity, GridFactors(), votes=100, **SMALL) == 1.0

    def test_synthetic_oracle_scores_one(self):
        dataset = SyntheticFactors()
        result = evaluate_factorvae(dataset.decode, dataset, votes=40, batch_size=32, variance_samples=500)
        assert result.score == 1.0
        assert result.train_accuracy == 1.0
        assert result.active_dims == 2

    def test_mixing_rotation_scores_near_half(self):
        scores = [factorvae_score(mixed, GridFactors(), votes=100, eval_votes=100, seed=s, **SMALL)
                  for s in range(20)]
        assert abs(float(np.mean(scores)) - 0.5) <= 0.1

    def test_zero_variance_dims_excluded(self):
        def padded(x):
            return torch.cat([x, torch.zeros(len(x), 1, dtype=x.dtype)], dim=1)

        result = evaluate_factorvae(padded, GridFactors(), votes=50, **SMALL)
        assert result.active_dims == 2
        assert result.score == 1.0

    def test_same_seed_same_score(self):
        a = evaluate_factorvae(mixed, GridFactors(), votes=50, seed=3, **SMALL)
        b = evaluate_factorvae(mixed, GridFactors(), votes=50, seed=3, **SMALL)
        assert a == b

    def test_needs_two_factors(self):
        with pytest.raises(InvalidArgumentError):
            factorvae_score(identity, GridFactors(sizes=(4,)), votes=10, **SMALL)

    def test_needs_enough_dims(self):
        def first_only(x):
            return x[:, :1]

        with pytest.raises(InvalidArgumentError, match="fewer than"):
            factorvae_score(first_only, GridFactors(), votes=10, **SMALL)

    def test_constant_representation(self):
        def constant(x):
            return torch.zeros_like(x)

        with pytest.raises(InvalidArgumentError, match="zero variance"):
            factorvae_score(constant, GridFactors(), votes=10, **SMALL)

    def test_bad_vote_settings(self):
        with pytest.raises(InvalidArgumentError):
            factorvae_score(identity, GridFactors(), votes=0)
        with pytest.raises(InvalidArgumentError):
            factorvae_score(identity, GridFactors(), votes=10, batch_size=1)


class TestMajorityVote:
    def test_classifier_and_accuracy(self):
        votes = np.array([[0, 1], [0, 1], [0, 0], [1, 0], [2, 1]])
        classifier = majority_vote_classifier(votes, num_dims=3, num_factors=2)
        assert classifier.tolist() == [1, 0, 1]
        assert vote_accuracy(classifier, votes) == pytest.approx(4 / 5)


# ---------------------------------------------------------------------------
# Generator-backed factors
# ---------------------------------------------------------------------------

def tiny_bundle(model: ModelConfig, q_head=False):
    arch = ArchitectureDescriptor(channels=1, height=16, width=16, noise_dim=model.noise_dim,
                                  code_dim=model.code_cardinality, code_kind=model.code_kind,
                                  hidden_dim=model.hidden_dim, base_channels=model.base_channels, q_head=q_head)
    return build_bundle(arch, seed=0)


DISCRETE = ModelConfig(noise_dim=4, code_cardinality=3, hidden_dim=16, base_channels=8)
CONTINUOUS = ModelConfig(noise_dim=4, code_kind=CodeKind.CONTINUOUS, code_cardinality=2, hidden_dim=16,
                         base_channels=8)


class TestGeneratorFactors:
    def test_discrete_factor_sizes(self):
        factors = GeneratorFactors(tiny_bundle(DISCRETE), DISCRETE, bins=5)
        assert factors.factor_sizes == [3, 5]
        images = factors.observations(np.array([[0, 1], [2, 4]]))
        assert images.shape == (2, 1, 16, 16)

    def test_continuous_bin_centers(self):
        factors = GeneratorFactors(tiny_bundle(CONTINUOUS), CONTINUOUS, bins=10)
        assert factors.factor_sizes == [10, 10, 10]
        _, c = factors.latents(np.array([[0, 9, 3]]))
        assert c[0].tolist() == pytest.approx([-0.9, 0.9])

    def test_shared_z_bank_entry(self):
        factors = GeneratorFactors(tiny_bundle(DISCRETE), DISCRETE)
        z, _ = factors.latents(np.array([[0, 2], [1, 2]]))
        assert torch.equal(z[0], z[1])

    def test_q_head_required(self):
        with pytest.raises(ConfigurationError) as info:
            q_head_representation(tiny_bundle(DISCRETE))
        assert info.value.key == "factor.representation"

    def test_q_head_representation_width(self):
        represent = q_head_representation(tiny_bundle(DISCRETE, q_head=True))
        assert represent(torch.rand(4, 1, 16, 16)).shape == (4, 3)

    def test_posthoc_encoder(self):
        encoder = train_posthoc_encoder(tiny_bundle(CONTINUOUS), CONTINUOUS, steps=3, batch_size=8)
        assert not encoder.training
        assert encoder(torch.rand(5, 1, 16, 16)).shape == (5, 2)
