"""Two-factor synthetic image dataset with an exact ground-truth oracle.

Factor 0 is the glyph shape (square, plus, diagonal cross); factor 1 is its
cell on a 3x3 grid. Each 16x16 image holds one 4x4 glyph, so every factor
combination renders to exactly one image and the decoder inverts rendering
without error.
"""

import logging
from typing import Optional, Tuple

import numpy as np
import torch

from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)

IMAGE_SIZE = 16
GLYPH_SIZE = 4
GRID = 3
# Top-left corner of each grid cell; cells are 5 pixels apart with a 1-pixel margin
_OFFSETS = (1, 6, 11)

_GLYPHS = np.array([
    [[1, 1, 1, 1],
     [1, 0, 0, 1],
     [1, 0, 0, 1],
     [1, 1, 1, 1]],
    [[0, 1, 1, 0],
     [1, 1, 1, 1],
     [1, 1, 1, 1],
     [0, 1, 1, 0]],
    [[1, 0, 0, 1],
     [0, 1, 1, 0],
     [0, 1, 1, 0],
     [1, 0, 0, 1]],
], dtype=np.float32)


class SyntheticFactors:
    """Enumerable dataset over (shape, position) with images in [-1, 1]."""

    factor_names = ("shape", "position")
    factor_sizes: Tuple[int, int] = (len(_GLYPHS), GRID * GRID)
    image_shape = (1, IMAGE_SIZE, IMAGE_SIZE)

    @property
    def num_factors(self) -> int:
        return len(self.factor_sizes)

    def __len__(self) -> int:
        return int(np.prod(self.factor_sizes))

    def all_factors(self) -> np.ndarray:
        """Every factor combination, shape-major, as int64 [N, 2]."""
        shapes, positions = np.meshgrid(
            np.arange(self.factor_sizes[0]), np.arange(self.factor_sizes[1]), indexing="ij"
        )
        return np.stack([shapes.ravel(), positions.ravel()], axis=1).astype(np.int64)

    def render(self, factors: np.ndarray) -> torch.Tensor:
        factors = np.asarray(factors, dtype=np.int64).reshape(-1, 2)
        if (factors < 0).any() or (factors >= np.array(self.factor_sizes)).any():
            raise InvalidArgumentError(f"Factor values out of range {self.factor_sizes}")
        images = np.full((len(factors), 1, IMAGE_SIZE, IMAGE_SIZE), -1.0, dtype=np.float32)
        for k, (shape, position) in enumerate(factors):
            row, col = _OFFSETS[position // GRID], _OFFSETS[position % GRID]
            images[k, 0, row:row + GLYPH_SIZE, col:col + GLYPH_SIZE] = _GLYPHS[shape] * 2.0 - 1.0
        return torch.from_numpy(images)

    def decode(self, images: torch.Tensor) -> torch.Tensor:
        """Oracle inverse of ``render``: images -> float factor values [N, 2]."""
        x = images.detach().cpu().numpy().reshape(-1, IMAGE_SIZE, IMAGE_SIZE)
        out = np.zeros((len(x), 2), dtype=np.float32)
        for k, img in enumerate(x):
            best = None
            for position in range(self.factor_sizes[1]):
                row, col = _OFFSETS[position // GRID], _OFFSETS[position % GRID]
                patch = (img[row:row + GLYPH_SIZE, col:col + GLYPH_SIZE] + 1.0) / 2.0
                mass = patch.sum()
                if best is None or mass > best[0]:
                    best = (mass, position, patch)
            _, position, patch = best
            shape = int(np.argmin([np.abs(patch - g).sum() for g in _GLYPHS]))
            out[k] = (shape, position)
        return torch.from_numpy(out)

    # FactorDataset protocol ------------------------------------------------

    def sample_factors(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([rng.integers(0, size, n) for size in self.factor_sizes], axis=1)

    def resample_except(self, fixed: int, value: int, n: int, rng: np.random.Generator) -> np.ndarray:
        factors = self.sample_factors(n, rng)
        factors[:, fixed] = value
        return factors

    def observations(self, factors: np.ndarray) -> torch.Tensor:
        return self.render(factors)

    # Training view -----------------------------------------------------------

    def training_arrays(self, repeats: int = 100, seed: Optional[int] = 0) -> Tuple[np.ndarray, np.ndarray]:
        """uint8 images [N, 1, 16, 16] and shape labels, each combination ``repeats`` times."""
        factors = np.tile(self.all_factors(), (repeats, 1))
        if seed is not None:
            factors = factors[np.random.default_rng(seed).permutation(len(factors))]
        images = ((self.render(factors).numpy() + 1.0) * 127.5).round().astype(np.uint8)
        return images, factors[:, 0].copy()
