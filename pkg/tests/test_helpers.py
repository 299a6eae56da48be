"""Tests for helpers.py: validators, seed derivation and content hashing."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pytest
import torch

from src.errors import InvalidArgumentError
from src.helpers import (
    chunked,
    content_hash,
    derive_seed,
    pairs_to_index,
    require_finite,
    require_positive,
    require_same_shape,
    state_dict_hash,
    to_jsonable,
    validate_index_pairs,
    validate_same_shape,
)

# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------

class TestValidators:
    def test_same_shape(self):
        assert validate_same_shape(torch.zeros(2, 3), torch.ones(2, 3)) is None
        assert "Shape mismatch" in validate_same_shape(torch.zeros(2, 3), torch.zeros(3, 2))

    def test_require_same_shape_raises(self):
        with pytest.raises(InvalidArgumentError):
            require_same_shape(torch.zeros(2), torch.zeros(3))

    def test_index_pairs(self):
        assert validate_index_pairs([(0, 1), (2, 0)], 3) is None
        assert "out of range" in validate_index_pairs([(0, 3)], 3)
        assert "itself" in validate_index_pairs([(1, 1)], 3)

    def test_require_positive(self):
        assert require_positive(3, "n1") == 3
        with pytest.raises(InvalidArgumentError, match="n1"):
            require_positive(0, "n1")

    def test_require_finite(self):
        with pytest.raises(InvalidArgumentError, match="images"):
            require_finite(torch.tensor([1.0, float("nan")]), "images")

    def test_pairs_to_index(self):
        left, right = pairs_to_index([(0, 2), (1, 3)])
        assert left.tolist() == [0, 1] and right.tolist() == [2, 3]
        empty_left, empty_right = pairs_to_index([])
        assert empty_left.numel() == 0 and empty_right.numel() == 0


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(0, 5, 1) == derive_seed(0, 5, 1)

    def test_streams_differ(self):
        seeds = {derive_seed(0, 5, stream) for stream in range(3)}
        assert len(seeds) == 3

    def test_steps_differ(self):
        assert derive_seed(0, 1) != derive_seed(0, 2)
        assert derive_seed(0, 1) != derive_seed(1, 1)


# ---------------------------------------------------------------------------
# Serialization and hashing
# ---------------------------------------------------------------------------

class Color(str, Enum):
    RED = "red"


@dataclass
class Record:
    color: Color
    path: Path
    values: tuple


class TestSerialization:
    def test_to_jsonable(self):
        data = to_jsonable({"record": Record(Color.RED, Path("/tmp/x"), (np.float32(1.5), torch.tensor([2])))})
        assert data == {"record": {"color": "red", "path": "/tmp/x", "values": [1.5, [2]]}}

    def test_content_hash_ignores_key_order(self):
        assert content_hash({"a": 1, "b": [2, 3]}) == content_hash({"b": [2, 3], "a": 1})
        assert content_hash({"a": 1}) != content_hash({"a": 2})

    def test_state_dict_hash(self):
        state = {"w": torch.ones(2, 2), "b": torch.zeros(2)}
        assert state_dict_hash(state) == state_dict_hash(dict(reversed(list(state.items()))))
        assert state_dict_hash(state) != state_dict_hash({"w": torch.ones(2, 2), "b": torch.ones(2)})

    def test_chunked(self):
        assert list(chunked([1, 2, 3, 4, 5], 2)) == [[1, 2], [3, 4], [5]]
