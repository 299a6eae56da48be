"""Similarity constraints (SC) over a batch of generated images.

Two variants share one building block: for each evaluated pair (i, j) with
code agreement a_ij and similarity s_ij, a *pull* term rewards similar
images and a *push* term rewards dissimilar ones.

    original:  1/(N(N-1)) * sum_i sum_{j != i} [ a * pull(s) + (1 - a) * push(s) ]
    modified:  1/(N1 N2) * sum_{pairs} [ lambda1 (1 - a) push(s) + lambda2 a pull(s) ]

Which function of s is the pull term depends on the measure orientation:
for a distance (Euclidean, low = similar) pull is the increasing member of
the term family; for a similarity (SSIM, high = similar) it is the
decreasing member. With literal_push_weight the modified push term is
weighted by a instead of (1 - a), exactly as the formula is printed.

The original variant evaluates each unordered pair once and counts it twice,
matching the ordered double sum and its 1/(N(N-1)) normalizer.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch

from .errors import ConfigurationError, InvalidArgumentError
from .helpers import make_generator, pairs_to_index, require_same_shape, validate_index_pairs
from .latent import LatentBatch, pair_agreement
from .models import PairScheme, SCConfig, SCVariant, SimMeasure, SSIMConfig, TermFamily
from .ssim import ImageBatch, SimilarityMatrix, ssim_matrix, ssim_paired

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass
class ContributionStats:
    """How many evaluated pairs pull (same code) versus push (different code).

    For continuous codes a pair counts as "same" when its agreement is at
    least 0.5; the agreement-weighted totals are reported alongside.
    """
    same_pairs: int
    diff_pairs: int
    ratio: Optional[float]          # diff:same, None when either side is empty
    same_weight: float
    diff_weight: float
    same_term_mean: Optional[float] = None
    diff_term_mean: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "same_pairs": self.same_pairs,
            "diff_pairs": self.diff_pairs,
            "ratio": self.ratio,
            "same_weight": self.same_weight,
            "diff_weight": self.diff_weight,
            "same_term_mean": self.same_term_mean,
            "diff_term_mean": self.diff_term_mean,
        }


@dataclass
class SCResult:
    value: torch.Tensor
    stats: ContributionStats
    pair_evaluations: int
    similarities: SimilarityMatrix


# ---------------------------------------------------------------------------
# Similarity measures
# ---------------------------------------------------------------------------

def euclidean_sim(x_i: torch.Tensor, x_j: torch.Tensor) -> torch.Tensor:
    """L2 norm of the flattened pixel difference."""
    require_same_shape(x_i, x_j)
    return torch.linalg.vector_norm((x_i - x_j).flatten())


def all_pairs(batch: int) -> List[Pair]:
    """Every unordered pair (i, j), i < j."""
    return [(i, j) for i in range(batch) for j in range(i + 1, batch)]


def pair_similarities(
    images: ImageBatch,
    pairs: Sequence[Pair],
    measure: SimMeasure,
    ssim_cfg: Optional[SSIMConfig] = None,
) -> SimilarityMatrix:
    if measure == SimMeasure.SSIM:
        return ssim_matrix(images, pairs, ssim_cfg)
    pairs = [(int(i), int(j)) for i, j in pairs]
    err = validate_index_pairs(pairs, len(images))
    if err:
        raise InvalidArgumentError(err)
    idx_i, idx_j = pairs_to_index(pairs, device=images.pixels.device)
    x = images.pixels
    values = torch.linalg.vector_norm((x[idx_i] - x[idx_j]).flatten(1), dim=1)
    return SimilarityMatrix(pairs=pairs, values=values, measure=SimMeasure.EUCLIDEAN)


# ---------------------------------------------------------------------------
# Term families
# ---------------------------------------------------------------------------

def increasing_term(s: torch.Tensor, family: TermFamily) -> torch.Tensor:
    if family == TermFamily.RECIPROCAL:
        return s
    if family == TermFamily.SQUARED:
        return s * s
    return torch.exp(s)


def decreasing_term(s: torch.Tensor, family: TermFamily, eps: float) -> torch.Tensor:
    if family == TermFamily.RECIPROCAL:
        return 1.0 / (s + eps)
    if family == TermFamily.SQUARED:
        return 1.0 / (s * s + eps)
    return torch.exp(-s)


def pull_push_terms(s: torch.Tensor, measure: SimMeasure, family: TermFamily,
                    eps: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """(pull, push): minimizing pull makes a pair similar, minimizing push dissimilar.

    SSIM is clamped at 0 for the reciprocal families so 1/(s + eps) stays
    positive and bounded by 1/eps.
    """
    if measure == SimMeasure.SSIM and family != TermFamily.EXPONENTIAL:
        s = s.clamp(min=0.0)
    up = increasing_term(s, family)
    down = decreasing_term(s, family, eps)
    if measure == SimMeasure.EUCLIDEAN:
        return up, down
    return down, up


# ---------------------------------------------------------------------------
# Pair sampling and accounting
# ---------------------------------------------------------------------------

def subsample_pairs(batch: int, n1: int, n2: int, seed: int,
                    scheme: PairScheme = PairScheme.CROSS) -> List[Pair]:
    """Draw disjoint index sets A (|A| = n1) and B (|B| = n2) and pair them up.

    ``cross`` returns all n1 * n2 pairs (a, b); ``cross_upper`` keeps only
    pairs with b > a; ``all_pairs`` ignores n1/n2 and returns every
    unordered pair of the batch.
    """
    if scheme == PairScheme.ALL_PAIRS:
        return all_pairs(batch)
    if n1 < 1 or n2 < 1:
        raise InvalidArgumentError(f"n1 and n2 must be >= 1, got {n1} and {n2}")
    if n1 + n2 > batch:
        raise InvalidArgumentError(f"n1 + n2 = {n1 + n2} exceeds the batch of {batch}")
    perm = torch.randperm(batch, generator=make_generator(seed)).tolist()
    group_a, group_b = perm[:n1], perm[n1:n1 + n2]
    pairs = [(a, b) for a in group_a for b in group_b]
    if scheme == PairScheme.CROSS_UPPER:
        pairs = [(a, b) for a, b in pairs if b > a]
    return pairs


def contribution_stats(
    codes: LatentBatch,
    pairs: Sequence[Pair],
    pull_terms: Optional[torch.Tensor] = None,
    push_terms: Optional[torch.Tensor] = None,
) -> ContributionStats:
    """Count same-code and different-code pairs among ``pairs``."""
    idx_i, idx_j = pairs_to_index(list(pairs), device=codes.c.device)
    agreement = pair_agreement(codes.c, codes.spec, idx_i, idx_j)
    same_mask = agreement >= 0.5
    same = int(same_mask.sum())
    diff = len(pairs) - same
    ratio = diff / same if same > 0 and diff > 0 else None

    def _mean(terms: Optional[torch.Tensor], mask: torch.Tensor) -> Optional[float]:
        if terms is None or not bool(mask.any()):
            return None
        return float(terms.detach()[mask].mean())

    return ContributionStats(
        same_pairs=same,
        diff_pairs=diff,
        ratio=ratio,
        same_weight=float(agreement.sum()),
        diff_weight=float((1.0 - agreement).sum()),
        same_term_mean=_mean(pull_terms, same_mask),
        diff_term_mean=_mean(push_terms, ~same_mask),
    )


# ---------------------------------------------------------------------------
# Constraint variants
# ---------------------------------------------------------------------------

def _pair_agreement_for(sims: SimilarityMatrix, codes: LatentBatch) -> torch.Tensor:
    idx_i, idx_j = pairs_to_index(sims.pairs, device=codes.c.device)
    agreement = pair_agreement(codes.c, codes.spec, idx_i, idx_j)
    return agreement.to(dtype=sims.values.dtype, device=sims.values.device)


def original_terms(sims: SimilarityMatrix, codes: LatentBatch, cfg: SCConfig):
    """Per-pair (combined, pull, push) terms of the original constraint."""
    agreement = _pair_agreement_for(sims, codes)
    pull, push = pull_push_terms(sims.values, sims.measure, cfg.term_family, cfg.eps)
    return agreement * pull + (1.0 - agreement) * push, pull, push


def sc_original_from(sims: SimilarityMatrix, codes: LatentBatch, cfg: SCConfig) -> torch.Tensor:
    """Original constraint from precomputed similarities over all unordered pairs."""
    n = len(codes)
    if n < 2:
        raise InvalidArgumentError(f"The similarity constraint needs a batch of at least 2, got {n}")
    combined, _, _ = original_terms(sims, codes, cfg)
    return 2.0 * combined.sum() / (n * (n - 1))


def sc_original(images: ImageBatch, codes: LatentBatch, cfg: SCConfig) -> torch.Tensor:
    """SCGAN similarity constraint for discrete or continuous codes."""
    n = len(images)
    if n < 2:
        raise InvalidArgumentError(f"The similarity constraint needs a batch of at least 2, got {n}")
    if len(codes) != n:
        raise InvalidArgumentError(f"{n} images but {len(codes)} codes")
    sims = pair_similarities(images, all_pairs(n), cfg.sim_measure, cfg.ssim)
    return sc_original_from(sims, codes, cfg)


def modified_normalizer(cfg: SCConfig, pair_count: int) -> float:
    if cfg.pair_scheme == PairScheme.ALL_PAIRS:
        return float(pair_count)
    return float(cfg.n1 * cfg.n2)


def modified_terms(sims: SimilarityMatrix, codes: LatentBatch, cfg: SCConfig):
    """Per-pair (combined, pull, push) terms of the modified constraint."""
    agreement = _pair_agreement_for(sims, codes)
    pull, push = pull_push_terms(sims.values, sims.measure, cfg.term_family, cfg.eps)
    push_weight = agreement if cfg.literal_push_weight else 1.0 - agreement
    pull_part = cfg.lambda2 * agreement * pull
    push_part = cfg.lambda1 * push_weight * push
    return pull_part + push_part, pull, push


def sc_modified_from(sims: SimilarityMatrix, codes: LatentBatch, cfg: SCConfig) -> torch.Tensor:
    if len(sims) == 0:
        raise InvalidArgumentError("The modified similarity constraint needs at least one pair")
    combined, _, _ = modified_terms(sims, codes, cfg)
    return combined.sum() / modified_normalizer(cfg, len(sims))


def sc_modified(images: ImageBatch, codes: LatentBatch, pairs: Sequence[Pair], cfg: SCConfig) -> torch.Tensor:
    """Contrastive-SSIM similarity constraint over the sampled pairs."""
    if cfg.sim_measure != SimMeasure.SSIM:
        raise ConfigurationError("The modified similarity constraint requires sim_measure='ssim'", key="sc.sim_measure")
    if not pairs:
        raise InvalidArgumentError("The modified similarity constraint needs at least one pair")
    if len(codes) != len(images):
        raise InvalidArgumentError(f"{len(images)} images but {len(codes)} codes")
    sims = ssim_matrix(images, pairs, cfg.ssim)
    return sc_modified_from(sims, codes, cfg)


def evaluate_constraint(images: ImageBatch, codes: LatentBatch, cfg: SCConfig, seed: int = 0) -> SCResult:
    """Run the configured variant and collect its contribution statistics.

    ``seed`` drives pair subsampling for the modified variant.
    """
    n = len(images)
    if cfg.variant == SCVariant.ORIGINAL:
        if n < 2:
            raise InvalidArgumentError(f"The similarity constraint needs a batch of at least 2, got {n}")
        sims = pair_similarities(images, all_pairs(n), cfg.sim_measure, cfg.ssim)
        value = sc_original_from(sims, codes, cfg)
    else:
        if cfg.sim_measure != SimMeasure.SSIM:
            raise ConfigurationError("The modified similarity constraint requires sim_measure='ssim'", key="sc.sim_measure")
        pairs = subsample_pairs(n, cfg.n1, cfg.n2, seed, cfg.pair_scheme)
        if not pairs:
            raise InvalidArgumentError("Pair subsampling produced no pairs; raise sc.n1/sc.n2")
        sims = ssim_matrix(images, pairs, cfg.ssim)
        value = sc_modified_from(sims, codes, cfg)
    pull, push = pull_push_terms(sims.values, sims.measure, cfg.term_family, cfg.eps)
    stats = contribution_stats(codes, sims.pairs, pull_terms=pull, push_terms=push)
    return SCResult(value=value, stats=stats, pair_evaluations=len(sims), similarities=sims)


def class_ssim_summary(images: ImageBatch, labels: torch.Tensor,
                       cfg: Optional[SSIMConfig] = None) -> Tuple[Optional[float], Optional[float]]:
    """Mean SSIM over same-label pairs and over different-label pairs."""
    pairs = all_pairs(len(images))
    if not pairs:
        return None, None
    idx_i, idx_j = pairs_to_index(pairs, device=images.pixels.device)
    with torch.no_grad():
        x = images.unit()
        values = ssim_paired(x[idx_i], x[idx_j], cfg or SSIMConfig())
    labels = labels.to(values.device)
    same = labels[idx_i] == labels[idx_j]
    intra = float(values[same].mean()) if bool(same.any()) else None
    inter = float(values[~same].mean()) if bool((~same).any()) else None
    return intra, inter
