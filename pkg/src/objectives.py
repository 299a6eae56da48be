"""GAN, CGAN, InfoGAN and similarity-constrained objectives.

Sign convention: both returned losses are minimized. D minimizes -V(D, G).
G minimizes the non-saturating -mean log D(G(z, c)) (or the literal
mean log(1 - D(G(z, c))) when ``saturating`` is set), plus lambda * SC for
scgan, plus SC for the modified model, minus lambda_info * L_I for infogan.
The similarity constraint never enters D's loss.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import torch
import torch.nn.functional as F

from .constraint import ContributionStats, SCResult, evaluate_constraint
from .errors import ConfigurationError, InvalidArgumentError
from .latent import LatentBatch
from .models import CodeKind, CodeSpec, ObjectiveConfig, ObjectiveKind, ValueRange
from .networks import ModelBundle
from .ssim import ImageBatch

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def clamp_prob(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(PROB_EPS, 1.0 - PROB_EPS)


def gan_value(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """V(D, G) = mean log D(x) + mean log(1 - D(G(z)))."""
    if d_real.numel() == 0 or d_fake.numel() == 0:
        raise InvalidArgumentError("gan_value needs non-empty real and fake batches")
    return torch.log(clamp_prob(d_real)).mean() + torch.log(1.0 - clamp_prob(d_fake)).mean()


def cgan_value(d_real_given_c: torch.Tensor, d_fake_given_c: torch.Tensor) -> torch.Tensor:
    """Conditional value; identical in form, D has already seen c."""
    return gan_value(d_real_given_c, d_fake_given_c)


def discriminator_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    return -gan_value(d_real, d_fake)


def generator_adversarial_loss(d_fake: torch.Tensor, saturating: bool = False) -> torch.Tensor:
    if d_fake.numel() == 0:
        raise InvalidArgumentError("generator loss needs a non-empty fake batch")
    if saturating:
        return torch.log(1.0 - clamp_prob(d_fake)).mean()
    return -torch.log(clamp_prob(d_fake)).mean()


def infogan_lower_bound(q_params: torch.Tensor, c: torch.Tensor, spec: CodeSpec) -> torch.Tensor:
    """Mean log Q(c | x) for the sampled codes; H(c) is reported separately.

    Discrete: ``q_params`` are logits. Continuous: Gaussian means, sigma = 1.
    """
    if q_params.shape != c.shape or c.shape[-1] != spec.dim:
        raise ConfigurationError(
            f"Q parameters {tuple(q_params.shape)} do not match codes {tuple(c.shape)} "
            f"for a {spec.kind.value} code of dim {spec.dim}",
            key="model.code_kind",
        )
    if spec.kind == CodeKind.DISCRETE:
        log_q = F.log_softmax(q_params, dim=1)
        return (log_q * c).sum(dim=1).mean()
    log_density = -0.5 * (c - q_params) ** 2 - _LOG_SQRT_2PI
    return log_density.sum(dim=1).mean()


def code_entropy(spec: CodeSpec) -> float:
    """Entropy of the code prior: log k (discrete) or sum of log widths (continuous, differential)."""
    if spec.kind == CodeKind.DISCRETE:
        return math.log(spec.cardinality)
    return spec.cardinality * math.log(spec.width)


@dataclass
class ObjectiveDiagnostics:
    gan_value: float
    d_real_mean: float
    d_fake_mean: float
    adversarial: float
    sc_value: Optional[float] = None
    contribution: Optional[ContributionStats] = None
    pair_evaluations: int = 0
    info_lower_bound: Optional[float] = None
    code_entropy: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "gan_value": self.gan_value,
            "d_real_mean": self.d_real_mean,
            "d_fake_mean": self.d_fake_mean,
            "adversarial": self.adversarial,
            "sc": self.sc_value,
            "pair_evaluations": self.pair_evaluations,
        }
        if self.contribution is not None:
            data["contribution"] = self.contribution.to_dict()
        if self.info_lower_bound is not None:
            data["info_lower_bound"] = self.info_lower_bound
            data["code_entropy"] = self.code_entropy
        return data


# ---------------------------------------------------------------------------
# Per-network objectives
# ---------------------------------------------------------------------------

def _d_codes(bundle: ModelBundle, codes: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
    return codes if bundle.descriptor.conditional_discriminator else None


def discriminator_objective(
    bundle: ModelBundle,
    real: torch.Tensor,
    fake: torch.Tensor,
    real_codes: Optional[torch.Tensor],
    fake_codes: torch.Tensor,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(d_loss, d_real, d_fake); ``fake`` is detached so only D receives gradients."""
    if bundle.descriptor.conditional_discriminator and real_codes is None:
        raise ConfigurationError("A conditional discriminator needs labels for the real batch", key="objective.kind")
    d_real, _ = bundle.discriminator(real, _d_codes(bundle, real_codes))
    d_fake, _ = bundle.discriminator(fake.detach(), _d_codes(bundle, fake_codes))
    return discriminator_loss(d_real, d_fake), d_real, d_fake


def constraint_term(fake: torch.Tensor, latent: LatentBatch, cfg: ObjectiveConfig, seed: int) -> Optional[SCResult]:
    if cfg.sc is None:
        return None
    images = ImageBatch(fake, ValueRange.SYMMETRIC)
    return evaluate_constraint(images, latent, cfg.sc, seed=seed)


def generator_objective(
    bundle: ModelBundle,
    fake: torch.Tensor,
    latent: LatentBatch,
    cfg: ObjectiveConfig,
    sc_seed: int = 0,
    sc: Optional[SCResult] = None,
) -> Tuple[torch.Tensor, Dict[str, Any]]:
    """G's loss on an already generated batch, with its regularizer parts.

    ``sc`` may be precomputed on ``fake`` (the trainer does so to time it).
    """
    d_fake, features = bundle.discriminator(fake, _d_codes(bundle, latent.c))
    adversarial = generator_adversarial_loss(d_fake, cfg.saturating)
    g_loss = adversarial
    parts: Dict[str, Any] = {"adversarial": adversarial, "d_fake": d_fake}

    if sc is None:
        sc = constraint_term(fake, latent, cfg, sc_seed)
    if sc is not None:
        weight = cfg.sc.lam if cfg.kind == ObjectiveKind.SCGAN else 1.0
        g_loss = g_loss + weight * sc.value
        parts["sc"] = sc

    if cfg.uses_q_head:
        if bundle.q_head is None:
            raise ConfigurationError("infogan needs a Q-head in the model bundle", key="objective.kind")
        lower_bound = infogan_lower_bound(bundle.q_head(features), latent.c, latent.spec)
        g_loss = g_loss - cfg.lambda_info * lower_bound
        parts["info_lower_bound"] = lower_bound
    return g_loss, parts


def total_objective(
    bundle: ModelBundle,
    batch: torch.Tensor,
    latent: LatentBatch,
    cfg: ObjectiveConfig,
    real_codes: Optional[torch.Tensor] = None,
    sc_seed: int = 0,
) -> Tuple[torch.Tensor, torch.Tensor, ObjectiveDiagnostics]:
    """(d_loss, g_loss, diagnostics) for one real batch and one sampled latent batch.

    Both losses are evaluated against the current D on the same generated
    images. ``real_codes`` are the one-hot labels of the real batch and are
    required when D is conditional.
    """
    latent = latent.to(bundle.device)
    fake = bundle.generator(latent.z, latent.c)
    d_loss, d_real, d_fake = discriminator_objective(bundle, batch, fake, real_codes, latent.c)
    g_loss, parts = generator_objective(bundle, fake, latent, cfg, sc_seed)
    return d_loss, g_loss, build_diagnostics(d_real, d_fake, parts, latent.spec)


def build_diagnostics(d_real: torch.Tensor, d_fake: torch.Tensor, parts: Dict[str, Any],
                      spec: CodeSpec) -> ObjectiveDiagnostics:
    with torch.no_grad():
        diag = ObjectiveDiagnostics(
            gan_value=float(gan_value(d_real, d_fake)),
            d_real_mean=float(d_real.mean()),
            d_fake_mean=float(d_fake.mean()),
            adversarial=float(parts["adversarial"]),
        )
        sc: Optional[SCResult] = parts.get("sc")
        if sc is not None:
            diag.sc_value = float(sc.value)
            diag.contribution = sc.stats
            diag.pair_evaluations = sc.pair_evaluations
        if "info_lower_bound" in parts:
            diag.info_lower_bound = float(parts["info_lower_bound"])
            diag.code_entropy = code_entropy(spec)
    return diag
