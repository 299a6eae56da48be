"""Differentiable windowed structural similarity (SSIM).

Local statistics come from a 'valid' (unpadded) convolution with the window,
so every local SSIM value uses a full window. Multi-channel images are scored
per channel and averaged. Images tagged as [-1, 1] are remapped to [0, 1]
before scoring so C1 = (k1 L)^2 and C2 = (k2 L)^2 keep their meaning with L = 1.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from .errors import InvalidArgumentError
from .helpers import pairs_to_index, require_finite, require_same_shape, validate_index_pairs
from .models import SimMeasure, SSIMConfig, ValueRange, WindowKind

logger = logging.getLogger(__name__)


@dataclass
class ImageBatch:
    """Images [batch, channels, height, width] tagged with their value range."""
    pixels: torch.Tensor
    value_range: ValueRange = ValueRange.SYMMETRIC

    def __post_init__(self):
        if self.pixels.dim() != 4:
            raise InvalidArgumentError(
                f"ImageBatch expects [batch, channels, height, width], got {tuple(self.pixels.shape)}"
            )

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def unit(self) -> torch.Tensor:
        """Pixels mapped into [0, 1]."""
        return to_unit_range(self.pixels, self.value_range)

    def check_range(self, tolerance: float = 1e-6) -> None:
        require_finite(self.pixels, "ImageBatch")
        low, high = self.value_range.bounds
        if self.pixels.min() < low - tolerance or self.pixels.max() > high + tolerance:
            raise InvalidArgumentError(f"ImageBatch values fall outside declared range [{low}, {high}]")


@dataclass
class SimilarityMatrix:
    """Sparse pair -> similarity values over one image batch."""
    pairs: List[Tuple[int, int]]
    values: torch.Tensor
    measure: SimMeasure
    _lookup: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup = {pair: k for k, pair in enumerate(self.pairs)}

    def __len__(self) -> int:
        return len(self.pairs)

    def get(self, i: int, j: int) -> torch.Tensor:
        """Value for (i, j); falls back to (j, i) since the measures are symmetric."""
        k = self._lookup.get((i, j), self._lookup.get((j, i)))
        if k is None:
            raise KeyError(f"Pair ({i}, {j}) was not evaluated")
        return self.values[k]


def to_unit_range(x: torch.Tensor, value_range: ValueRange) -> torch.Tensor:
    if value_range == ValueRange.SYMMETRIC:
        return (x + 1.0) * 0.5
    return x


@lru_cache(maxsize=32)
def _window_1d(size: int, kind: WindowKind, sigma: float) -> Tuple[float, ...]:
    if kind == WindowKind.UNIFORM:
        return tuple([1.0 / size] * size)
    coords = torch.arange(size, dtype=torch.float64) - size // 2
    gauss = torch.exp(-(coords ** 2) / (2 * sigma ** 2))
    return tuple((gauss / gauss.sum()).tolist())


def make_window(cfg: SSIMConfig, channels: int, dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    """Depthwise conv kernel [channels, 1, k, k] holding the normalized 2-D window."""
    w1 = torch.tensor(_window_1d(cfg.window_size, cfg.window, cfg.sigma), dtype=dtype, device=device)
    w2 = torch.outer(w1, w1)
    return w2.expand(channels, 1, cfg.window_size, cfg.window_size).contiguous()


def _check_window(cfg: SSIMConfig, height: int, width: int) -> None:
    if cfg.window_size > min(height, width):
        raise InvalidArgumentError(
            f"SSIM window {cfg.window_size} is larger than the image ({height}x{width})"
        )


def ssim_map(x: torch.Tensor, y: torch.Tensor, cfg: SSIMConfig) -> torch.Tensor:
    """Local SSIM values for paired batches [P, C, H, W] -> [P, C, H-k+1, W-k+1].

    Inputs must already be in the [0, data_range] scale.
    """
    require_same_shape(x, y)
    channels = x.shape[1]
    _check_window(cfg, x.shape[2], x.shape[3])
    window = make_window(cfg, channels, x.dtype, x.device)

    def filt(t: torch.Tensor) -> torch.Tensor:
        return F.conv2d(t, window, groups=channels)

    mu_x = filt(x)
    mu_y = filt(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    sigma_xx = filt(x * x) - mu_xx
    sigma_yy = filt(y * y) - mu_yy
    sigma_xy = filt(x * y) - mu_xy

    c1, c2 = cfg.c1, cfg.c2
    numerator = (2 * mu_xy + c1) * (2 * sigma_xy + c2)
    denominator = (mu_xx + mu_yy + c1) * (sigma_xx + sigma_yy + c2)
    return numerator / denominator


def ssim_paired(x: torch.Tensor, y: torch.Tensor, cfg: SSIMConfig,
                value_range: ValueRange = ValueRange.UNIT) -> torch.Tensor:
    """Mean SSIM of each (x[p], y[p]) pair -> [P]."""
    x = to_unit_range(x, value_range)
    y = to_unit_range(y, value_range)
    return ssim_map(x, y, cfg).flatten(1).mean(dim=1)


def ssim_pair(x_i: torch.Tensor, x_j: torch.Tensor, cfg: Optional[SSIMConfig] = None,
              value_range: ValueRange = ValueRange.UNIT) -> torch.Tensor:
    """SSIM of two images ([C, H, W] or [H, W]) as a differentiable scalar."""
    cfg = cfg or SSIMConfig()
    require_same_shape(x_i, x_j)
    if x_i.dim() == 2:
        x_i, x_j = x_i.unsqueeze(0), x_j.unsqueeze(0)
    if x_i.dim() != 3:
        raise InvalidArgumentError(f"Expected an image [C, H, W], got {tuple(x_i.shape)}")
    return ssim_paired(x_i.unsqueeze(0), x_j.unsqueeze(0), cfg, value_range)[0]


def ssim_matrix(batch: ImageBatch, pairs: Sequence[Tuple[int, int]],
                cfg: Optional[SSIMConfig] = None) -> SimilarityMatrix:
    """SSIM for each requested pair of a batch, evaluated in one vectorized pass."""
    cfg = cfg or SSIMConfig()
    pairs = [(int(i), int(j)) for i, j in pairs]
    err = validate_index_pairs(pairs, len(batch))
    if err:
        raise InvalidArgumentError(err)
    if not pairs:
        return SimilarityMatrix(pairs=[], values=batch.pixels.new_zeros(0), measure=SimMeasure.SSIM)
    idx_i, idx_j = pairs_to_index(pairs, device=batch.pixels.device)
    x = batch.unit()
    values = ssim_paired(x[idx_i], x[idx_j], cfg)
    return SimilarityMatrix(pairs=pairs, values=values, measure=SimMeasure.SSIM)
