"""Enums and dataclasses shared across the toolkit."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from .errors import ConfigurationError, InvalidArgumentError


class NoiseDistribution(str, Enum):
    UNIFORM = "uniform"     # U(-1, 1)
    NORMAL = "normal"       # N(0, 1)


class CodeKind(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class ValueRange(str, Enum):
    UNIT = "unit"               # [0, 1]
    SYMMETRIC = "symmetric"     # [-1, 1], tanh generator output

    @property
    def bounds(self) -> Tuple[float, float]:
        return (0.0, 1.0) if self is ValueRange.UNIT else (-1.0, 1.0)


class WindowKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


class SCVariant(str, Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


class SimMeasure(str, Enum):
    EUCLIDEAN = "euclidean"     # distance: low = similar
    SSIM = "ssim"               # similarity: high = similar


class TermFamily(str, Enum):
    RECIPROCAL = "reciprocal"       # (Sim, 1/Sim)
    SQUARED = "squared"             # (Sim^2, 1/Sim^2)
    EXPONENTIAL = "exponential"     # (e^Sim, e^-Sim)


class PairScheme(str, Enum):
    CROSS = "cross"                 # disjoint A x B
    CROSS_UPPER = "cross_upper"     # A x B keeping j > i only
    ALL_PAIRS = "all_pairs"         # every unordered pair of the batch


class ObjectiveKind(str, Enum):
    GAN = "gan"
    CGAN = "cgan"
    INFOGAN = "infogan"
    SCGAN = "scgan"
    MODIFIED = "modified"


class DatasetId(str, Enum):
    MNIST = "mnist"
    FASHION_MNIST = "fashion-mnist"
    CELEBA = "celeba"
    CIFAR10 = "cifar10"
    SYNTHETIC_FACTORS = "synthetic-factors"


class GridMode(str, Enum):
    FIX_C_PER_COLUMN = "fix-c-per-column"
    SWEEP_C = "fix-z-per-row-sweep-c"


class FeatureExtractorId(str, Enum):
    DATASET_CLASSIFIER = "dataset-classifier"
    RAW_PIXELS = "raw-pixels"


class RepresentationKind(str, Enum):
    Q_HEAD = "q_head"
    ENCODER = "encoder"
    IDENTITY = "identity"       # ground-truth factors of the synthetic dataset


class MetricName(str, Enum):
    PARZEN = "parzen"
    FID = "fid"
    FACTOR = "factor"


# ---------------------------------------------------------------------------
# Latent specs
# ---------------------------------------------------------------------------

@dataclass
class NoiseSpec:
    """Noise vector z and its sampling distribution."""
    dim: int = 62
    distribution: NoiseDistribution = NoiseDistribution.UNIFORM

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"Noise dimension must be >= 1, got {self.dim}")


@dataclass
class CodeSpec:
    """Conditional code c.

    Discrete codes are one-hot vectors of length ``cardinality``; continuous
    codes have ``cardinality`` scalar slots, each within [low, high].
    """
    kind: CodeKind = CodeKind.DISCRETE
    cardinality: int = 10
    low: float = -1.0
    high: float = 1.0
    stratified: bool = False

    def __post_init__(self):
        minimum = 2 if self.kind == CodeKind.DISCRETE else 1
        if self.cardinality < minimum:
            raise InvalidArgumentError(
                f"{self.kind.value} code needs cardinality >= {minimum}, got {self.cardinality}"
            )
        if self.high <= self.low:
            raise InvalidArgumentError(f"Code range [{self.low}, {self.high}] is empty")

    @property
    def dim(self) -> int:
        return self.cardinality

    @property
    def width(self) -> float:
        return self.high - self.low


# ---------------------------------------------------------------------------
# Similarity constraint
# ---------------------------------------------------------------------------

@dataclass
class SSIMConfig:
    """Windowed SSIM constants (11x11 Gaussian, sigma 1.5, k1 0.01, k2 0.03)."""
    window_size: int = 11
    window: WindowKind = WindowKind.GAUSSIAN
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ConfigurationError(
                f"SSIM window size must be a positive odd integer, got {self.window_size}",
                key="sc.ssim.window_size",
            )
        for name in ("sigma", "k1", "k2", "data_range"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"SSIM {name} must be > 0", key=f"sc.ssim.{name}")

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


@dataclass
class SCConfig:
    """All similarity-constraint knobs.

    ``lam`` weights the original constraint inside the objective; ``lambda1``
    and ``lambda2`` weight the push and pull terms of the modified one.
    """
    variant: SCVariant = SCVariant.MODIFIED
    code_kind: CodeKind = CodeKind.DISCRETE
    sim_measure: SimMeasure = SimMeasure.SSIM
    term_family: TermFamily = TermFamily.EXPONENTIAL
    lam: float = 1.0
    lambda1: float = math.e
    lambda2: float = math.exp(1.5)
    n1: int = 10
    n2: int = 18
    eps: float = 1e-8
    literal_push_weight: bool = False
    pair_scheme: PairScheme = PairScheme.CROSS
    ssim: SSIMConfig = field(default_factory=SSIMConfig)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"sc.{name} must be > 0", key=f"sc.{name}")
        if self.lam < 0:
            raise ConfigurationError("sc.lam must be >= 0", key="sc.lam")
        if self.n1 < 1 or self.n2 < 1:
            raise ConfigurationError("sc.n1 and sc.n2 must be >= 1", key="sc.n1")
        if self.variant == SCVariant.MODIFIED and self.sim_measure != SimMeasure.SSIM:
            raise ConfigurationError(
                "The modified similarity constraint requires sim_measure='ssim'",
                key="sc.sim_measure",
            )

    @classmethod
    def scgan(cls, **overrides) -> "SCConfig":
        """Original constraint: Euclidean distance, (Sim, 1/Sim), every pair."""
        values = dict(
            variant=SCVariant.ORIGINAL,
            sim_measure=SimMeasure.EUCLIDEAN,
            term_family=TermFamily.RECIPROCAL,
            pair_scheme=PairScheme.ALL_PAIRS,
        )
        values.update(overrides)
        return cls(**values)


# ---------------------------------------------------------------------------
# Model / objective / training
# ---------------------------------------------------------------------------

@dataclass
class ModelConfig:
    """Latent layout plus the width knobs of the G/D architecture."""
    noise_dim: int = 62
    noise_distribution: NoiseDistribution = NoiseDistribution.UNIFORM
    code_kind: CodeKind = CodeKind.DISCRETE
    code_cardinality: int = 10
    code_low: float = -1.0
    code_high: float = 1.0
    stratified: bool = False
    hidden_dim: int = 1024
    base_channels: int = 64

    def __post_init__(self):
        if self.hidden_dim < 1 or self.base_channels < 1:
            raise ConfigurationError("model widths must be >= 1", key="model.hidden_dim")
        # Validate eagerly so bad values surface with the config key
        try:
            self.noise_spec()
            self.code_spec()
        except InvalidArgumentError as e:
            raise ConfigurationError(str(e), key="model") from e

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(dim=self.noise_dim, distribution=self.noise_distribution)

    def code_spec(self) -> CodeSpec:
        return CodeSpec(
            kind=self.code_kind,
            cardinality=self.code_cardinality,
            low=self.code_low,
            high=self.code_high,
            stratified=self.stratified,
        )


_SC_KINDS = {ObjectiveKind.SCGAN: SCVariant.ORIGINAL, ObjectiveKind.MODIFIED: SCVariant.MODIFIED}


@dataclass
class ObjectiveConfig:
    """Which minimax game to play and its regularizer weights."""
    kind: ObjectiveKind = ObjectiveKind.MODIFIED
    lambda_info: float = 1.0
    conditional_discriminator: bool = False
    saturating: bool = False
    sc: Optional[SCConfig] = None

    def __post_init__(self):
        if self.kind in _SC_KINDS:
            if self.sc is None:
                raise ConfigurationError(
                    f"Objective '{self.kind.value}' needs an 'sc' section", key="sc"
                )
            if self.sc.variant != _SC_KINDS[self.kind]:
                raise ConfigurationError(
                    f"Objective '{self.kind.value}' requires sc.variant="
                    f"'{_SC_KINDS[self.kind].value}', got '{self.sc.variant.value}'",
                    key="sc.variant",
                )
        elif self.sc is not None:
            raise ConfigurationError(
                f"Objective '{self.kind.value}' takes no similarity constraint; remove the 'sc' section",
                key="sc",
            )
        if self.kind == ObjectiveKind.INFOGAN and self.lambda_info <= 0:
            raise ConfigurationError("objective.lambda_info must be > 0", key="objective.lambda_info")

    @property
    def uses_q_head(self) -> bool:
        return self.kind == ObjectiveKind.INFOGAN

    @property
    def conditions_discriminator(self) -> bool:
        return self.kind == ObjectiveKind.CGAN or (
            self.kind in _SC_KINDS and self.conditional_discriminator
        )


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999

    def __post_init__(self):
        if self.kind != "adam":
            raise ConfigurationError(f"Unsupported optimizer '{self.kind}' (only 'adam')", key="optimizer.kind")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ConfigurationError("learning rates must be > 0", key="optimizer.lr_g")


@dataclass
class DatasetConfig:
    id: DatasetId = DatasetId.MNIST
    root: str = ""                  # empty: SCGAN_DATA_ROOT
    subset: Optional[int] = None    # first N images of a seeded shuffle

    def __post_init__(self):
        if self.subset is not None and self.subset < 2:
            raise ConfigurationError("dataset.subset must be >= 2", key="dataset.subset")


@dataclass
class RunConfig:
    seed: int = 0
    epochs: int = 25
    batch_size: int = 32
    log_every: int = 50
    checkpoint_every: int = 1000
    max_steps: Optional[int] = None
    deterministic: bool = True
    device: str = ""
    grid_rows: int = 10
    grid_cols: int = 10

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigurationError("run.batch_size must be >= 2", key="run.batch_size")
        if self.epochs < 1:
            raise ConfigurationError("run.epochs must be >= 1", key="run.epochs")
        if self.log_every < 1 or self.checkpoint_every < 1:
            raise ConfigurationError("run cadences must be >= 1", key="run.log_every")


@dataclass
class TrainConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveConfig = field(
        default_factory=lambda: ObjectiveConfig(kind=ObjectiveKind.MODIFIED, sc=SCConfig())
    )
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        sc = self.objective.sc
        if sc is not None:
            if sc.code_kind != self.model.code_kind:
                raise ConfigurationError(
                    f"sc.code_kind='{sc.code_kind.value}' does not match "
                    f"model.code_kind='{self.model.code_kind.value}'",
                    key="sc.code_kind",
                )
            if sc.pair_scheme != PairScheme.ALL_PAIRS and sc.n1 + sc.n2 > self.run.batch_size:
                raise ConfigurationError(
                    f"sc.n1 + sc.n2 = {sc.n1 + sc.n2} exceeds run.batch_size={self.run.batch_size}",
                    key="sc.n2",
                )
        if self.objective.conditions_discriminator and self.model.code_kind != CodeKind.DISCRETE:
            raise ConfigurationError(
                "A conditional discriminator sees class labels and needs a discrete code", key="model.code_kind"
            )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _default_sigma_grid() -> List[float]:
    # 20 log-spaced points in [0.01, 1]
    return [10 ** (-2 + 2 * i / 19) for i in range(20)]


@dataclass
class ParzenConfig:
    sample_count: int = 10000
    sigma_grid: List[float] = field(default_factory=_default_sigma_grid)
    validation_fraction: float = 0.1
    chunk_size: int = 100

    def __post_init__(self):
        if not self.sigma_grid or any(s <= 0 for s in self.sigma_grid):
            raise ConfigurationError("parzen.sigma_grid must be non-empty and positive", key="parzen.sigma_grid")
        if not 0 < self.validation_fraction < 1:
            raise ConfigurationError("parzen.validation_fraction must be in (0, 1)", key="parzen.validation_fraction")
        if self.sample_count < 1:
            raise ConfigurationError("parzen.sample_count must be >= 1", key="parzen.sample_count")


@dataclass
class FIDConfig:
    extractor: FeatureExtractorId = FeatureExtractorId.DATASET_CLASSIFIER
    sample_count: int = 10000
    extractor_seed: int = 0
    extractor_epochs: int = 3

    def __post_init__(self):
        if self.sample_count < 2:
            raise ConfigurationError("fid.sample_count must be >= 2", key="fid.sample_count")


@dataclass
class FactorConfig:
    representation: RepresentationKind = RepresentationKind.ENCODER
    votes: int = 800
    eval_votes: Optional[int] = None
    batch_size: int = 64
    variance_samples: int = 10000
    encoder_steps: int = 2000
    bins: int = 10

    def __post_init__(self):
        if self.votes < 1 or self.batch_size < 2:
            raise ConfigurationError("factor.votes >= 1 and factor.batch_size >= 2 required", key="factor.votes")
