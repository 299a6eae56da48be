"""Generator, discriminator and Q-head networks.

For a C x H x W dataset (H and W divisible by 4):

    G: (z ++ c) -> dense hidden -> dense 128*(H/4)*(W/4) -> ConvT base -> ConvT C, tanh
    D: image [++ broadcast c] -> conv base -> conv 128 -> dense hidden (features) -> sigmoid
    Q: D features -> dense 128 -> code parameters (logits or Gaussian means)

Leaky slope 0.1 throughout D and Q. 28x28 MNIST gives the 7x7x128 layout.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn

from .errors import ConfigurationError
from .models import CodeKind, ModelConfig, ObjectiveConfig, OptimizerConfig

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.1


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Everything needed to rebuild the networks before loading weights."""
    channels: int
    height: int
    width: int
    noise_dim: int
    code_dim: int
    code_kind: CodeKind
    hidden_dim: int = 1024
    base_channels: int = 64
    conditional_discriminator: bool = False
    q_head: bool = False

    def __post_init__(self):
        if self.height % 4 or self.width % 4:
            raise ConfigurationError(
                f"Image size {self.height}x{self.width} must be divisible by 4", key="dataset.id"
            )

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["code_kind"] = self.code_kind.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureDescriptor":
        data = dict(data)
        data["code_kind"] = CodeKind(data["code_kind"])
        return cls(**data)

    @classmethod
    def build(cls, image_shape: Tuple[int, int, int], model: ModelConfig,
              objective: ObjectiveConfig) -> "ArchitectureDescriptor":
        channels, height, width = image_shape
        return cls(
            channels=channels,
            height=height,
            width=width,
            noise_dim=model.noise_dim,
            code_dim=model.code_cardinality,
            code_kind=model.code_kind,
            hidden_dim=model.hidden_dim,
            base_channels=model.base_channels,
            conditional_discriminator=objective.conditions_discriminator,
            q_head=objective.uses_q_head,
        )


class Generator(nn.Module):
    def __init__(self, arch: ArchitectureDescriptor):
        super().__init__()
        self.arch = arch
        h4, w4 = arch.height // 4, arch.width // 4
        self.fc = nn.Sequential(
            nn.Linear(arch.noise_dim + arch.code_dim, arch.hidden_dim),
            nn.BatchNorm1d(arch.hidden_dim),
            nn.ReLU(True),
            nn.Linear(arch.hidden_dim, 128 * h4 * w4),
            nn.BatchNorm1d(128 * h4 * w4),
            nn.ReLU(True),
        )
        self.deconv = nn.Sequential(
            nn.ConvTranspose2d(128, arch.base_channels, 4, stride=2, padding=1),
            nn.BatchNorm2d(arch.base_channels),
            nn.ReLU(True),
            nn.ConvTranspose2d(arch.base_channels, arch.channels, 4, stride=2, padding=1),
            nn.Tanh(),
        )

    def forward(self, z: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        h = self.fc(torch.cat([z, c], dim=1))
        h = h.view(-1, 128, self.arch.height // 4, self.arch.width // 4)
        return self.deconv(h)


class Discriminator(nn.Module):
    """Returns (probability real, penultimate features)."""

    def __init__(self, arch: ArchitectureDescriptor):
        super().__init__()
        self.arch = arch
        in_channels = arch.channels + (arch.code_dim if arch.conditional_discriminator else 0)
        h4, w4 = arch.height // 4, arch.width // 4
        self.conv = nn.Sequential(
            nn.Conv2d(in_channels, arch.base_channels, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(arch.base_channels, 128, 4, stride=2, padding=1),
            nn.BatchNorm2d(128),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
        )
        self.fc = nn.Sequential(
            nn.Linear(128 * h4 * w4, arch.hidden_dim),
            nn.BatchNorm1d(arch.hidden_dim),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
        )
        self.head = nn.Linear(arch.hidden_dim, 1)

    def forward(self, x: torch.Tensor, c: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        if self.arch.conditional_discriminator:
            if c is None:
                raise ConfigurationError("This discriminator is conditional and needs codes", key="objective.kind")
            planes = c[:, :, None, None].expand(-1, -1, x.shape[2], x.shape[3])
            x = torch.cat([x, planes.to(x.dtype)], dim=1)
        features = self.fc(self.conv(x).flatten(1))
        prob = torch.sigmoid(self.head(features)).squeeze(1)
        return prob, features


class QHead(nn.Module):
    """Code distribution parameters from discriminator features.

    Discrete codes: logits of a categorical. Continuous codes: means of a
    factored Gaussian with fixed unit variance.
    """

    def __init__(self, arch: ArchitectureDescriptor):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(arch.hidden_dim, 128),
            nn.BatchNorm1d(128),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Linear(128, arch.code_dim),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)


def init_weights(module: nn.Module) -> None:
    """DCGAN-style N(0, 0.02) init for conv/linear, N(1, 0.02) for batch norm."""
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
        nn.init.normal_(module.weight, 0.0, 0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, (nn.BatchNorm1d, nn.BatchNorm2d)):
        nn.init.normal_(module.weight, 1.0, 0.02)
        nn.init.zeros_(module.bias)


@dataclass
class ModelBundle:
    """G, D, optional Q and their optimizers, owned by one training loop."""
    generator: nn.Module
    discriminator: nn.Module
    descriptor: ArchitectureDescriptor
    q_head: Optional[nn.Module] = None
    opt_g: Optional[torch.optim.Optimizer] = None
    opt_d: Optional[torch.optim.Optimizer] = None

    @property
    def device(self) -> torch.device:
        return next(self.generator.parameters()).device

    def generator_parameters(self):
        # Q is trained with G so the information term updates both
        params = list(self.generator.parameters())
        if self.q_head is not None:
            params += list(self.q_head.parameters())
        return params

    def train(self) -> None:
        for net in self.networks():
            net.train()

    def eval(self) -> None:
        for net in self.networks():
            net.eval()

    def networks(self):
        nets = [self.generator, self.discriminator]
        if self.q_head is not None:
            nets.append(self.q_head)
        return nets

    def parameter_count(self) -> int:
        return sum(p.numel() for net in self.networks() for p in net.parameters())


def build_bundle(
    arch: ArchitectureDescriptor,
    optimizer: Optional[OptimizerConfig] = None,
    device: Optional[torch.device] = None,
    seed: Optional[int] = None,
) -> ModelBundle:
    """Construct and initialize the networks, plus Adam optimizers when requested."""
    if seed is not None:
        torch.manual_seed(seed)
    device = device or torch.device("cpu")
    generator = Generator(arch)
    discriminator = Discriminator(arch)
    q_head = QHead(arch) if arch.q_head else None
    for net in (generator, discriminator, q_head):
        if net is not None:
            net.apply(init_weights)
            net.to(device)

    bundle = ModelBundle(generator=generator, discriminator=discriminator, descriptor=arch, q_head=q_head)
    if optimizer is not None:
        bundle.opt_g = torch.optim.Adam(
            bundle.generator_parameters(), lr=optimizer.lr_g, betas=(optimizer.beta1, optimizer.beta2)
        )
        bundle.opt_d = torch.optim.Adam(
            discriminator.parameters(), lr=optimizer.lr_d, betas=(optimizer.beta1, optimizer.beta2)
        )
    logger.debug("Built networks for %s (%d parameters)", arch.image_shape, bundle.parameter_count())
    return bundle
