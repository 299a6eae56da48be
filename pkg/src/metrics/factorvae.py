"""FactorVAE disentanglement score.

Each vote fixes one ground-truth factor, renders a batch in which every other
factor varies, and records which representation dimension has the smallest
variance after normalizing every dimension by its global standard deviation.
A majority-vote classifier maps dimension -> factor on training votes; the
score is its accuracy on a separate set of evaluation votes.

For trained generators the factors are the conditional code and the noise
vector: ``GeneratorFactors`` renders images from (code, z-bank index) factor
values and the representation is the InfoGAN Q-head or a post-hoc encoder.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigurationError, InvalidArgumentError
from ..helpers import derive_seed, make_generator
from ..latent import one_hot, sample_latent
from ..models import CodeKind, ModelConfig
from ..networks import ModelBundle

logger = logging.getLogger(__name__)

Representation = Callable[[torch.Tensor], torch.Tensor]


class FactorDataset(Protocol):
    factor_sizes: Sequence[int]

    def sample_factors(self, n: int, rng: np.random.Generator) -> np.ndarray:
        ...

    def observations(self, factors: np.ndarray) -> torch.Tensor:
        ...


@dataclass
class FactorVAEResult:
    score: float
    train_accuracy: float
    active_dims: int
    votes: int
    eval_votes: int


def _represent(representation: Representation, images: torch.Tensor) -> np.ndarray:
    with torch.no_grad():
        out = representation(images)
    out = out.detach().cpu().numpy() if isinstance(out, torch.Tensor) else np.asarray(out)
    return out.astype(np.float64).reshape(len(images), -1)


def global_scale(representation: Representation, dataset: FactorDataset, samples: int,
                 rng: np.random.Generator, batch_size: int = 500) -> np.ndarray:
    """Per-dimension standard deviation over ``samples`` random observations."""
    chunks = []
    remaining = samples
    while remaining > 0:
        n = min(batch_size, remaining)
        chunks.append(_represent(representation, dataset.observations(dataset.sample_factors(n, rng))))
        remaining -= n
    return np.concatenate(chunks).std(axis=0, ddof=1)


def generate_votes(
    representation: Representation,
    dataset: FactorDataset,
    scale: np.ndarray,
    active: np.ndarray,
    votes: int,
    batch_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """[votes, 2] array of (least-variance dimension, fixed factor)."""
    num_factors = len(dataset.factor_sizes)
    out = np.zeros((votes, 2), dtype=np.int64)
    for v in range(votes):
        fixed = int(rng.integers(num_factors))
        factors = dataset.sample_factors(batch_size, rng)
        factors[:, fixed] = factors[0, fixed]
        reps = _represent(representation, dataset.observations(factors))[:, active] / scale[active]
        variances = reps.var(axis=0, ddof=1)
        out[v] = (active[int(np.argmin(variances))], fixed)
    return out


def majority_vote_classifier(votes: np.ndarray, num_dims: int, num_factors: int) -> np.ndarray:
    """Factor predicted for each dimension (argmax of the vote counts)."""
    counts = np.zeros((num_dims, num_factors), dtype=np.int64)
    np.add.at(counts, (votes[:, 0], votes[:, 1]), 1)
    return counts.argmax(axis=1)


def vote_accuracy(classifier: np.ndarray, votes: np.ndarray) -> float:
    return float((classifier[votes[:, 0]] == votes[:, 1]).mean())


def evaluate_factorvae(
    representation: Representation,
    dataset: FactorDataset,
    votes: int = 800,
    batch_size: int = 64,
    eval_votes: Optional[int] = None,
    variance_samples: int = 10000,
    seed: int = 0,
) -> FactorVAEResult:
    num_factors = len(dataset.factor_sizes)
    if num_factors < 2:
        raise InvalidArgumentError(f"The FactorVAE score needs at least 2 factors, got {num_factors}")
    if votes < 1 or batch_size < 2:
        raise InvalidArgumentError("votes must be >= 1 and batch_size >= 2")
    rng = np.random.default_rng(seed)

    scale = global_scale(representation, dataset, variance_samples, rng)
    if len(scale) < num_factors:
        raise InvalidArgumentError(
            f"Representation has {len(scale)} dims, fewer than the {num_factors} factors"
        )
    active = np.flatnonzero(scale > 0)
    if len(active) < len(scale):
        logger.warning("Excluding %d zero-variance representation dimensions", len(scale) - len(active))
    if len(active) == 0:
        raise InvalidArgumentError("Every representation dimension has zero variance")

    train_votes = generate_votes(representation, dataset, scale, active, votes, batch_size, rng)
    held_out = generate_votes(representation, dataset, scale, active, eval_votes or votes, batch_size, rng)
    classifier = majority_vote_classifier(train_votes, len(scale), num_factors)
    result = FactorVAEResult(
        score=vote_accuracy(classifier, held_out),
        train_accuracy=vote_accuracy(classifier, train_votes),
        active_dims=int(len(active)),
        votes=votes,
        eval_votes=len(held_out),
    )
    logger.info("FactorVAE score %.4f (train %.4f, %d active dims)",
                result.score, result.train_accuracy, result.active_dims)
    return result


def factorvae_score(representation: Representation, dataset: FactorDataset, votes: int = 800,
                    **kwargs) -> float:
    return evaluate_factorvae(representation, dataset, votes, **kwargs).score


# ---------------------------------------------------------------------------
# Generator-backed factors
# ---------------------------------------------------------------------------

class GeneratorFactors:
    """Factors of a trained generator: the code and an index into a bank of z vectors.

    Discrete codes contribute one factor (the class); each continuous slot is
    quantized into ``bins`` values at the bin centers.
    """

    def __init__(self, bundle: ModelBundle, model: ModelConfig, bins: int = 10, seed: int = 0):
        self.bundle = bundle
        self.spec = model.code_spec()
        self.bins = bins
        self.z_bank = sample_latent(model.noise_spec(), self.spec, bins, seed=derive_seed(seed, 7)).z
        if self.spec.kind == CodeKind.DISCRETE:
            code_sizes = [self.spec.cardinality]
        else:
            code_sizes = [bins] * self.spec.cardinality
        self.factor_sizes = code_sizes + [bins]

    def sample_factors(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([rng.integers(0, size, n) for size in self.factor_sizes], axis=1)

    def latents(self, factors: np.ndarray):
        factors = torch.as_tensor(factors, dtype=torch.long)
        z = self.z_bank[factors[:, -1]]
        if self.spec.kind == CodeKind.DISCRETE:
            c = one_hot(factors[:, 0], self.spec.cardinality)
        else:
            centers = (factors[:, :-1].float() + 0.5) / self.bins
            c = self.spec.low + centers * self.spec.width
        return z, c

    def observations(self, factors: np.ndarray) -> torch.Tensor:
        z, c = self.latents(factors)
        device = self.bundle.device
        self.bundle.generator.eval()
        with torch.no_grad():
            return self.bundle.generator(z.to(device), c.to(device))


def q_head_representation(bundle: ModelBundle) -> Representation:
    if bundle.q_head is None:
        raise ConfigurationError("This checkpoint has no Q-head; use the encoder representation",
                                 key="factor.representation")

    def represent(images: torch.Tensor) -> torch.Tensor:
        bundle.discriminator.eval()
        bundle.q_head.eval()
        _, features = bundle.discriminator(images.to(bundle.device))
        return bundle.q_head(features)

    return represent


class CodeEncoder(nn.Module):
    """Post-hoc encoder regressing the code from a generated image."""

    def __init__(self, channels: int, height: int, width: int, code_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(channels, 32, 4, stride=2, padding=1),
            nn.LeakyReLU(0.1, True),
            nn.Conv2d(32, 64, 4, stride=2, padding=1),
            nn.LeakyReLU(0.1, True),
            nn.Flatten(),
            nn.Linear(64 * (height // 4) * (width // 4), 128),
            nn.LeakyReLU(0.1, True),
            nn.Linear(128, code_dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def train_posthoc_encoder(bundle: ModelBundle, model: ModelConfig, steps: int = 2000,
                          batch_size: int = 64, lr: float = 1e-3, seed: int = 0) -> CodeEncoder:
    """Fit E minimizing |E(G(z, c)) - c|^2 on fresh generated pairs; G stays frozen."""
    arch = bundle.descriptor
    device = bundle.device
    torch.manual_seed(derive_seed(seed, 11))
    encoder = CodeEncoder(arch.channels, arch.height, arch.width, arch.code_dim).to(device)
    optimizer = torch.optim.Adam(encoder.parameters(), lr=lr)
    generator = make_generator(derive_seed(seed, 12))
    bundle.generator.eval()
    for step in range(steps):
        latent = sample_latent(model.noise_spec(), model.code_spec(), batch_size, generator=generator).to(device)
        with torch.no_grad():
            images = bundle.generator(latent.z, latent.c)
        loss = F.mse_loss(encoder(images), latent.c)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if (step + 1) % 500 == 0:
            logger.debug("encoder step %d: mse %.5f", step + 1, float(loss.detach()))
    encoder.eval()
    return encoder
