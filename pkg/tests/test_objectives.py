"""Tests for objectives.py: value functions, information bound and composition."""

import math

import pytest
import torch
import torch.nn as nn

from src.errors import ConfigurationError, InvalidArgumentError
from src.latent import LatentBatch, one_hot, sample_latent
from src.models import (
    CodeKind,
    CodeSpec,
    NoiseSpec,
    ObjectiveConfig,
    ObjectiveKind,
    SCConfig,
    SSIMConfig,
)
from src.networks import ArchitectureDescriptor, build_bundle
from src.objectives import (
    cgan_value,
    code_entropy,
    discriminator_loss,
    gan_value,
    generator_adversarial_loss,
    infogan_lower_bound,
    total_objective,
)


def tiny_arch(**overrides) -> ArchitectureDescriptor:
    values = dict(channels=1, height=16, width=16, noise_dim=4, code_dim=3, code_kind=CodeKind.DISCRETE,
                  hidden_dim=16, base_channels=8)
    values.update(overrides)
    return ArchitectureDescriptor(**values)


def latent_for(labels, cardinality=3, noise_dim=4) -> LatentBatch:
    labels = torch.as_tensor(labels)
    spec = CodeSpec(kind=CodeKind.DISCRETE, cardinality=cardinality)
    z = torch.rand(len(labels), noise_dim, generator=torch.Generator().manual_seed(0)) * 2 - 1
    return LatentBatch(z=z, c=one_hot(labels, cardinality), spec=spec)


class ConstantGenerator(nn.Module):
    """Emits the same flat image for every latent."""

    def __init__(self, shape=(1, 16, 16), value=0.3):
        super().__init__()
        self.shape = shape
        self.level = nn.Parameter(torch.tensor(value))

    def forward(self, z, c):
        return self.level.expand(z.shape[0], *self.shape)


# ---------------------------------------------------------------------------
# Value functions
# ---------------------------------------------------------------------------


class TestValueFunctions:
    def test_maximally_confused_discriminator(self):
        half = torch.full((8,), 0.5)
        assert float(gan_value(half, half)) == pytest.approx(-2 * math.log(2), abs=1e-6)

    def test_perfect_discriminator_approaches_zero(self):
        value = gan_value(torch.ones(4), torch.zeros(4))
        assert float(value) == pytest.approx(0.0, abs=1e-5)

    def test_cgan_value_has_gan_form(self):
        gen = torch.Generator().manual_seed(0)
        d_real, d_fake = torch.rand(6, generator=gen), torch.rand(6, generator=gen)
        assert float(cgan_value(d_real, d_fake)) == pytest.approx(float(gan_value(d_real, d_fake)))

    def test_discriminator_loss_is_negated_value(self):
        d_real, d_fake = torch.tensor([0.9, 0.7]), torch.tensor([0.2, 0.4])
        expected = -(math.log(0.9) + math.log(0.7)) / 2 - (math.log(0.8) + math.log(0.6)) / 2
        assert float(discriminator_loss(d_real, d_fake)) == pytest.approx(expected, abs=1e-6)

    def test_generator_losses(self):
        d_fake = torch.tensor([0.25, 0.5])
        non_saturating = -(math.log(0.25) + math.log(0.5)) / 2
        saturating = (math.log(0.75) + math.log(0.5)) / 2
        assert float(generator_adversarial_loss(d_fake)) == pytest.approx(non_saturating, abs=1e-6)
        assert float(generator_adversarial_loss(d_fake, saturating=True)) == pytest.approx(saturating, abs=1e-6)

    def test_empty_batches_rejected(self):
        with pytest.raises(InvalidArgumentError):
            gan_value(torch.empty(0), torch.rand(2))
        with pytest.raises(InvalidArgumentError):
            generator_adversarial_loss(torch.empty(0))


# ---------------------------------------------------------------------------
# Information lower bound
# ---------------------------------------------------------------------------


class TestInfoLowerBound:
    def test_uniform_posterior(self, discrete_spec):
        c = one_hot(torch.arange(10), 10)
        bound = infogan_lower_bound(torch.zeros(10, 10), c, discrete_spec)
        assert float(bound) == pytest.approx(-math.log(10), abs=1e-6)

    def test_confident_posterior_is_near_zero(self, discrete_spec):
        c = one_hot(torch.tensor([1, 4, 9]), 10)
        bound = infogan_lower_bound(c * 100.0, c, discrete_spec)
        assert float(bound) == pytest.approx(0.0, abs=1e-6)

    def test_continuous_exact_mean(self):
        spec = CodeSpec(kind=CodeKind.CONTINUOUS, cardinality=2)
        c = torch.tensor([[0.1, -0.4], [0.9, 0.0]])
        bound = infogan_lower_bound(c.clone(), c, spec)
        assert float(bound) == pytest.approx(-math.log(2 * math.pi), abs=1e-6)

    def test_shape_mismatch_raises(self, discrete_spec):
        with pytest.raises(ConfigurationError):
            infogan_lower_bound(torch.zeros(4, 2), one_hot(torch.arange(4), 10), discrete_spec)

    def test_code_entropy(self, discrete_spec):
        assert code_entropy(discrete_spec) == pytest.approx(math.log(10))
        continuous = CodeSpec(kind=CodeKind.CONTINUOUS, cardinality=2, low=-1.0, high=1.0)
        assert code_entropy(continuous) == pytest.approx(2 * math.log(2))


# ---------------------------------------------------------------------------
# total_objective composition
# ---------------------------------------------------------------------------


class TestTotalObjective:
    def test_gan_kind_has_no_constraint(self):
        bundle = build_bundle(tiny_arch(), seed=0)
        latent = latent_for([0, 1, 2, 0, 1, 2, 0, 1])
        real = torch.rand(8, 1, 16, 16) * 2 - 1
        d_loss, g_loss, diag = total_objective(bundle, real, latent, ObjectiveConfig(kind=ObjectiveKind.GAN))
        assert torch.isfinite(d_loss) and torch.isfinite(g_loss)
        assert diag.sc_value is None
        assert diag.pair_evaluations == 0
        assert float(g_loss) == pytest.approx(diag.adversarial)
        assert diag.to_dict()["sc"] is None

    def test_modified_identical_same_class_batch(self):
        bundle = build_bundle(tiny_arch(), seed=0)
        bundle.generator = ConstantGenerator()
        latent = latent_for([1] * 16)
        sc = SCConfig(n1=4, n2=6, ssim=SSIMConfig(window_size=7))
        cfg = ObjectiveConfig(kind=ObjectiveKind.MODIFIED, sc=sc)
        real = torch.rand(16, 1, 16, 16) * 2 - 1
        _, g_loss, diag = total_objective(bundle, real, latent, cfg)
        # lambda2 * exp(-1) per pair, averaged over n1 * n2 pairs
        assert diag.sc_value == pytest.approx(math.exp(0.5), abs=1e-4)
        assert diag.pair_evaluations == 24
        assert float(g_loss) == pytest.approx(diag.adversarial + diag.sc_value, abs=1e-4)

    def test_scgan_with_zero_weight_matches_cgan(self):
        real = torch.rand(8, 1, 16, 16, generator=torch.Generator().manual_seed(1)) * 2 - 1
        latent = latent_for([0, 1, 2, 0, 1, 2, 0, 1])
        real_codes = latent.c.clone()
        cgan_cfg = ObjectiveConfig(kind=ObjectiveKind.CGAN)
        scgan_cfg = ObjectiveConfig(kind=ObjectiveKind.SCGAN, conditional_discriminator=True,
                                    sc=SCConfig.scgan(lam=0.0))
        arch = tiny_arch(conditional_discriminator=True)
        d_c, g_c, _ = total_objective(build_bundle(arch, seed=3), real, latent, cgan_cfg, real_codes=real_codes)
        d_s, g_s, diag = total_objective(build_bundle(arch, seed=3), real, latent, scgan_cfg, real_codes=real_codes)
        assert diag.sc_value is not None
        assert float(d_s) == pytest.approx(float(d_c), abs=1e-6)
        assert float(g_s) == pytest.approx(float(g_c), abs=1e-6)

    def test_conditional_discriminator_needs_real_codes(self):
        bundle = build_bundle(tiny_arch(conditional_discriminator=True), seed=0)
        latent = latent_for([0, 1, 2, 0])
        with pytest.raises(ConfigurationError):
            total_objective(bundle, torch.rand(4, 1, 16, 16), latent, ObjectiveConfig(kind=ObjectiveKind.CGAN))

    def test_infogan_reports_information_terms(self):
        bundle = build_bundle(tiny_arch(q_head=True), seed=0)
        latent = latent_for([0, 1, 2, 0, 1, 2])
        cfg = ObjectiveConfig(kind=ObjectiveKind.INFOGAN)
        _, g_loss, diag = total_objective(bundle, torch.rand(6, 1, 16, 16), latent, cfg)
        assert diag.info_lower_bound is not None and diag.info_lower_bound <= 0.0
        assert diag.code_entropy == pytest.approx(math.log(3))
        assert float(g_loss) == pytest.approx(diag.adversarial - diag.info_lower_bound, abs=1e-5)
        assert "info_lower_bound" in diag.to_dict()

    def test_infogan_without_q_head_raises(self):
        bundle = build_bundle(tiny_arch(), seed=0)
        latent = latent_for([0, 1, 2, 0])
        with pytest.raises(ConfigurationError):
            total_objective(bundle, torch.rand(4, 1, 16, 16), latent, ObjectiveConfig(kind=ObjectiveKind.INFOGAN))

    def test_one_descent_step_lowers_generator_loss(self):
        bundle = build_bundle(tiny_arch(), seed=0)
        for net in bundle.networks():
            net.double()
        cfg = ObjectiveConfig(kind=ObjectiveKind.GAN)
        sampled = sample_latent(NoiseSpec(dim=4), CodeSpec(cardinality=3), 8, seed=2)
        latent = LatentBatch(z=sampled.z.double(), c=sampled.c.double(), spec=sampled.spec)
        real = torch.rand(8, 1, 16, 16, generator=torch.Generator().manual_seed(2), dtype=torch.float64) * 2 - 1
        optimizer = torch.optim.SGD(bundle.generator.parameters(), lr=1e-3)

        _, before, _ = total_objective(bundle, real, latent, cfg)
        optimizer.zero_grad()
        before.backward()
        optimizer.step()
        with torch.no_grad():
            _, after, _ = total_objective(bundle, real, latent, cfg)
        assert float(after) < float(before)

    def test_generator_gradient_matches_central_differences(self):
        bundle = build_bundle(tiny_arch(), seed=0)
        for net in bundle.networks():
            net.double()
        sc = SCConfig(n1=3, n2=4, ssim=SSIMConfig(window_size=7))
        cfg = ObjectiveConfig(kind=ObjectiveKind.MODIFIED, sc=sc)
        sampled = sample_latent(NoiseSpec(dim=4), CodeSpec(cardinality=3), 8, seed=3)
        latent = LatentBatch(z=sampled.z.double(), c=sampled.c.double(), spec=sampled.spec)
        real = torch.rand(8, 1, 16, 16, generator=torch.Generator().manual_seed(3), dtype=torch.float64) * 2 - 1
        last = bundle.generator.deconv[3]

        def g_loss() -> torch.Tensor:
            return total_objective(bundle, real, latent, cfg, sc_seed=5)[1]

        g_loss().backward()
        analytic = [float(last.bias.grad[0])] + [float(last.weight.grad[k, 0, 1, 2]) for k in range(3)]
        entries = [(last.bias, (0,))] + [(last.weight, (k, 0, 1, 2)) for k in range(3)]
        h = 1e-6
        numeric = []
        with torch.no_grad():
            for param, index in entries:
                param[index] += h
                up = float(g_loss())
                param[index] -= 2 * h
                down = float(g_loss())
                param[index] += h
                numeric.append((up - down) / (2 * h))
        assert numeric == pytest.approx(analytic, rel=1e-4, abs=1e-7)
