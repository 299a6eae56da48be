"""Gaussian Parzen-window log-likelihood of test data under generated samples.

log p(x) = logsumexp_i(-|x - g_i|^2 / (2 sigma^2)) - log N - D log(sigma sqrt(2 pi))

Pixels are scored in [0, 1]. Sigma is picked from the grid by the mean
log-likelihood of a validation slice of the test set; the rest of the test
set gives the reported mean and its standard error.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ..errors import InvalidArgumentError, NumericalError
from ..helpers import to_jsonable
from ..models import MetricName, ParzenConfig
from ..ssim import ImageBatch
from .report import MetricReport

logger = logging.getLogger(__name__)


def _flatten(batch: ImageBatch) -> np.ndarray:
    return batch.unit().detach().cpu().double().reshape(len(batch), -1).numpy()


def parzen_log_density(x: np.ndarray, centers: np.ndarray, sigma: float,
                       chunk_size: int = 100) -> np.ndarray:
    """Per-row log density of ``x`` [M, D] under kernels at ``centers`` [N, D]."""
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if x.ndim != 2 or centers.ndim != 2 or x.shape[1] != centers.shape[1]:
        raise InvalidArgumentError(f"Incompatible shapes {x.shape} and {centers.shape}")
    if len(x) == 0 or len(centers) == 0:
        raise InvalidArgumentError("Parzen estimate needs at least one test point and one center")
    n, dim = centers.shape
    center_sq = (centers ** 2).sum(axis=1)
    norm = math.log(n) + dim * math.log(sigma * math.sqrt(2 * math.pi))
    out = np.empty(len(x))
    for start in range(0, len(x), chunk_size):
        block = x[start:start + chunk_size]
        d2 = (block ** 2).sum(axis=1)[:, None] + center_sq[None, :] - 2.0 * block @ centers.T
        np.maximum(d2, 0.0, out=d2)
        out[start:start + chunk_size] = logsumexp(-d2 / (2.0 * sigma ** 2), axis=1) - norm
    return out


def select_sigma(centers: np.ndarray, validation: np.ndarray, grid: List[float],
                 chunk_size: int = 100) -> Tuple[float, List[float]]:
    """Sigma with the highest mean validation log-likelihood, plus every score."""
    scores = []
    for sigma in grid:
        ll = parzen_log_density(validation, centers, sigma, chunk_size)
        scores.append(float(ll.mean()) if np.isfinite(ll).all() else -math.inf)
    if not any(math.isfinite(s) for s in scores):
        raise NumericalError(f"Parzen log-likelihood underflowed for every sigma in {grid}")
    best = int(np.argmax(scores))
    return float(grid[best]), scores


def parzen_loglik(generated: ImageBatch, test: ImageBatch, cfg: Optional[ParzenConfig] = None,
                  seed: int = 0) -> MetricReport:
    cfg = cfg or ParzenConfig()
    if len(generated) < 1 or len(test) < 1:
        raise InvalidArgumentError("parzen_loglik needs non-empty generated and test batches")
    generated.check_range()
    test.check_range()
    centers = _flatten(generated)
    points = _flatten(test)
    if centers.shape[1] != points.shape[1]:
        raise InvalidArgumentError(f"Generated dim {centers.shape[1]} != test dim {points.shape[1]}")

    scores = None
    if len(cfg.sigma_grid) == 1:
        sigma, evaluation = cfg.sigma_grid[0], points
    else:
        order = np.random.default_rng(seed).permutation(len(points))
        n_val = max(1, int(round(cfg.validation_fraction * len(points))))
        if n_val >= len(points):
            raise InvalidArgumentError(
                f"{len(points)} test points leave nothing to evaluate after a validation slice of {n_val}"
            )
        validation, evaluation = points[order[:n_val]], points[order[n_val:]]
        sigma, scores = select_sigma(centers, validation, cfg.sigma_grid, cfg.chunk_size)

    ll = parzen_log_density(evaluation, centers, sigma, cfg.chunk_size)
    if not np.isfinite(ll).all():
        raise NumericalError(f"Parzen log-likelihood is not finite at sigma={sigma}")
    mean = float(ll.mean())
    sem = float(ll.std(ddof=1) / math.sqrt(len(ll))) if len(ll) > 1 else 0.0
    logger.info("Parzen log-likelihood %.3f ± %.3f (sigma=%.4f, %d centers, %d test points)",
                mean, sem, sigma, len(centers), len(ll))
    return MetricReport(
        metric=MetricName.PARZEN,
        value=mean,
        uncertainty=sem,
        config=to_jsonable(cfg),
        seed=seed,
        details={"sigma": sigma, "validation_scores": scores, "centers": len(centers), "test_points": len(ll)},
    )
