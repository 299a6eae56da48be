"""Frechet distance between Gaussians fitted to two feature sets."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import InvalidArgumentError, NumericalError

logger = logging.getLogger(__name__)

SHRINKAGE = 1e-6


@dataclass
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray
    count: int = 0


def gaussian_moments(features: np.ndarray, shrinkage: float = SHRINKAGE) -> GaussianMoments:
    """Mean and shrunk covariance (Sigma + shrinkage * I) of ``features`` [n, d]."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise InvalidArgumentError(f"Need a [n >= 2, d] feature matrix, got shape {x.shape}")
    if len(x) < x.shape[1] + 1:
        logger.warning("Only %d samples for %d feature dims; covariance is rank deficient", len(x), x.shape[1])
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    return GaussianMoments(mean=x.mean(axis=0), cov=cov + shrinkage * np.eye(x.shape[1]), count=len(x))


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    sym = (matrix + matrix.T) / 2.0
    try:
        w, v = linalg.eigh(sym)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Matrix square root did not converge: {e}") from e
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def trace_sqrt_product(cov1: np.ndarray, cov2: np.ndarray) -> float:
    """Tr((cov1 cov2)^1/2) via the symmetric form cov1^1/2 cov2 cov1^1/2."""
    root1 = _psd_sqrt(cov1)
    middle = root1 @ cov2 @ root1
    middle = (middle + middle.T) / 2.0
    try:
        w = linalg.eigvalsh(middle)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Matrix square root did not converge: {e}") from e
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def frechet_distance(m1: GaussianMoments, m2: GaussianMoments) -> float:
    if m1.mean.shape != m2.mean.shape or m1.cov.shape != m2.cov.shape:
        raise InvalidArgumentError(f"Feature dims differ: {m1.mean.shape} vs {m2.mean.shape}")
    diff = m1.mean - m2.mean
    value = float(diff @ diff) + float(np.trace(m1.cov) + np.trace(m2.cov)) - 2.0 * trace_sqrt_product(m1.cov, m2.cov)
    return max(value, 0.0)


def fid(features_real: np.ndarray, features_fake: np.ndarray, shrinkage: float = SHRINKAGE) -> float:
    real = np.asarray(features_real)
    fake = np.asarray(features_fake)
    if real.ndim != 2 or fake.ndim != 2 or real.shape[1] != fake.shape[1]:
        raise InvalidArgumentError(f"Feature matrices must share their dimension: {real.shape} vs {fake.shape}")
    return frechet_distance(gaussian_moments(real, shrinkage), gaussian_moments(fake, shrinkage))
