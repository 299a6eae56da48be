"""Tests for synthetic.py"""

import numpy as np
import pytest
import torch

from src.errors import InvalidArgumentError
from src.synthetic import SyntheticFactors


@pytest.fixture()
def factors():
    return SyntheticFactors()


class TestSyntheticFactors:
    def test_enumeration(self, factors):
        combos = factors.all_factors()
        assert combos.shape == (27, 2)
        assert len({tuple(row) for row in combos}) == 27
        assert len(factors) == 27

    def test_render_range_and_shape(self, factors):
        images = factors.render(factors.all_factors())
        assert images.shape == (27, 1, 16, 16)
        assert set(images.unique().tolist()) == {-1.0, 1.0}

    def test_every_combination_renders_distinctly(self, factors):
        images = factors.render(factors.all_factors()).view(27, -1)
        assert len({tuple(row.tolist()) for row in images}) == 27

    def test_decode_inverts_render(self, factors):
        combos = factors.all_factors()
        decoded = factors.decode(factors.render(combos))
        assert torch.equal(decoded.long(), torch.from_numpy(combos))

    def test_out_of_range_factors(self, factors):
        with pytest.raises(InvalidArgumentError):
            factors.render(np.array([[3, 0]]))

    def test_resample_except_fixes_one_factor(self, factors):
        rng = np.random.default_rng(0)
        batch = factors.resample_except(1, 4, 50, rng)
        assert (batch[:, 1] == 4).all()
        assert len(np.unique(batch[:, 0])) > 1

    def test_training_arrays(self, factors):
        images, labels = factors.training_arrays(repeats=2, seed=3)
        assert images.dtype == np.uint8 and images.shape == (54, 1, 16, 16)
        assert set(np.unique(images)) == {0, 255}
        assert np.bincount(labels).tolist() == [18, 18, 18]
