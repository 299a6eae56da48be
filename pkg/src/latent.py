"""Noise and conditional-code sampling, plus code-agreement weights.

Agreement a_ij in [0, 1] is what every similarity-constraint variant uses to
decide whether a pair of generated images should be pulled together (a=1)
or pushed apart (a=0). Discrete codes give the inner product of one-hots;
continuous codes give 1 - min(1, mean|c_i - c_j| / range width).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F

from .errors import InvalidArgumentError
from .helpers import make_generator, require_positive
from .models import CodeKind, CodeSpec, NoiseDistribution, NoiseSpec

logger = logging.getLogger(__name__)


@dataclass
class LatentBatch:
    """Paired noise vectors z and codes c for one generator batch."""
    z: torch.Tensor     # [batch, noise_dim]
    c: torch.Tensor     # [batch, code_dim]
    spec: CodeSpec

    def __post_init__(self):
        if self.z.shape[0] != self.c.shape[0]:
            raise InvalidArgumentError(
                f"z has {self.z.shape[0]} rows but c has {self.c.shape[0]}"
            )
        if self.c.shape[1] != self.spec.dim:
            raise InvalidArgumentError(
                f"Code width {self.c.shape[1]} does not match spec dim {self.spec.dim}"
            )

    def __len__(self) -> int:
        return self.z.shape[0]

    @property
    def labels(self) -> torch.Tensor:
        """Class index per row (discrete codes only)."""
        if self.spec.kind != CodeKind.DISCRETE:
            raise InvalidArgumentError("Class labels exist only for discrete codes")
        return self.c.argmax(dim=1)

    def to(self, device: torch.device) -> "LatentBatch":
        return LatentBatch(z=self.z.to(device), c=self.c.to(device), spec=self.spec)


def sample_noise(spec: NoiseSpec, batch: int, generator: torch.Generator) -> torch.Tensor:
    if spec.distribution == NoiseDistribution.UNIFORM:
        return torch.rand(batch, spec.dim, generator=generator) * 2.0 - 1.0
    return torch.randn(batch, spec.dim, generator=generator)


def one_hot(labels: torch.Tensor, cardinality: int) -> torch.Tensor:
    return F.one_hot(labels.long(), num_classes=cardinality).float()


def sample_codes(spec: CodeSpec, batch: int, generator: torch.Generator) -> torch.Tensor:
    if spec.kind == CodeKind.DISCRETE:
        if spec.stratified:
            # Balanced classes, shuffled across rows
            labels = torch.arange(batch) % spec.cardinality
            labels = labels[torch.randperm(batch, generator=generator)]
        else:
            labels = torch.randint(0, spec.cardinality, (batch,), generator=generator)
        return one_hot(labels, spec.cardinality)
    u = torch.rand(batch, spec.cardinality, generator=generator)
    return spec.low + u * spec.width


def sample_latent(
    noise_spec: NoiseSpec,
    code_spec: CodeSpec,
    batch: int,
    seed: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
) -> LatentBatch:
    """Sample z and c for ``batch`` generator inputs.

    Same seed, same batch, bit for bit. Sampling happens on the CPU so the
    stream does not depend on the device the model lives on.
    """
    require_positive(batch, "batch")
    require_positive(noise_spec.dim, "noise dim")
    if generator is None:
        generator = make_generator(0 if seed is None else seed)
    z = sample_noise(noise_spec, batch, generator)
    c = sample_codes(code_spec, batch, generator)
    return LatentBatch(z=z, c=c, spec=code_spec)


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------

def code_agreement(c_i: torch.Tensor, c_j: torch.Tensor, spec: CodeSpec) -> float:
    """Agreement weight between two code vectors, in [0, 1]."""
    if c_i.shape != c_j.shape or c_i.numel() != spec.dim:
        raise InvalidArgumentError(
            f"Code vectors must both have {spec.dim} entries, got "
            f"{tuple(c_i.shape)} and {tuple(c_j.shape)}"
        )
    return float(agreement_matrix(torch.stack([c_i.flatten(), c_j.flatten()]), spec)[0, 1])


def agreement_matrix(c: torch.Tensor, spec: CodeSpec) -> torch.Tensor:
    """All pairwise agreements of a code batch as a symmetric [B, B] matrix."""
    if c.dim() != 2 or c.shape[1] != spec.dim:
        raise InvalidArgumentError(f"Expected codes of shape [batch, {spec.dim}], got {tuple(c.shape)}")
    c = c.detach().double()
    if spec.kind == CodeKind.DISCRETE:
        return (c @ c.t()).clamp(0.0, 1.0)
    gap = (c.unsqueeze(1) - c.unsqueeze(0)).abs().mean(dim=2) / spec.width
    return 1.0 - gap.clamp(max=1.0)


def pair_agreement(c: torch.Tensor, spec: CodeSpec, idx_i: torch.Tensor, idx_j: torch.Tensor) -> torch.Tensor:
    """Agreement a_ij for the listed pairs only, as a 1-D tensor."""
    if spec.kind == CodeKind.DISCRETE:
        c = c.detach().double()
        return (c[idx_i] * c[idx_j]).sum(dim=1).clamp(0.0, 1.0)
    gap = (c[idx_i] - c[idx_j]).detach().double().abs().mean(dim=1) / spec.width
    return 1.0 - gap.clamp(max=1.0)
