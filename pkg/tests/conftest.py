"""Shared fixtures for scgan-toolkit tests."""

import os
import tempfile

import hypothesis
import pytest

# Force test env vars before the package loads its .env: CPU only, a scratch
# data root, deterministic kernels, quiet logs
os.environ["SCGAN_DATA_ROOT"] = os.path.join(tempfile.gettempdir(), "scgan-toolkit-tests")
os.environ["SCGAN_DEVICE"] = "cpu"
os.environ["SCGAN_DETERMINISTIC"] = "true"
os.environ["SCGAN_LOG_LEVEL"] = "WARNING"

hypothesis.settings.register_profile("fast", max_examples=25, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

import torch  # noqa: E402

from src.data import ingest_dataset  # noqa: E402
from src.latent import LatentBatch, one_hot  # noqa: E402
from src.models import (  # noqa: E402
    CodeKind,
    CodeSpec,
    DatasetConfig,
    DatasetId,
    ModelConfig,
    ObjectiveConfig,
    ObjectiveKind,
    RunConfig,
    SCConfig,
    SSIMConfig,
    TrainConfig,
)


@pytest.fixture()
def discrete_spec():
    return CodeSpec(kind=CodeKind.DISCRETE, cardinality=10)


@pytest.fixture()
def make_codes():
    """Build a discrete LatentBatch from a list of class labels."""
    def _make(labels, cardinality=10):
        labels = torch.as_tensor(labels)
        spec = CodeSpec(kind=CodeKind.DISCRETE, cardinality=cardinality)
        c = one_hot(labels, cardinality)
        return LatentBatch(z=torch.zeros(len(labels), 4), c=c, spec=spec)
    return _make


@pytest.fixture(scope="session")
def synthetic_handle():
    return ingest_dataset(DatasetId.SYNTHETIC_FACTORS)


# ---------------------------------------------------------------------------
# Config factories
# ---------------------------------------------------------------------------

def tiny_config(kind: ObjectiveKind = ObjectiveKind.MODIFIED, **run) -> TrainConfig:
    """Small synthetic-factors config that trains in seconds on a CPU."""
    sc = None
    if kind == ObjectiveKind.MODIFIED:
        sc = SCConfig(n1=4, n2=6, ssim=SSIMConfig(window_size=7))
    elif kind == ObjectiveKind.SCGAN:
        sc = SCConfig.scgan()
    run_values = dict(seed=0, epochs=1, batch_size=16, log_every=1, checkpoint_every=5, max_steps=6,
                      grid_rows=3, grid_cols=3)
    run_values.update(run)
    return TrainConfig(
        dataset=DatasetConfig(id=DatasetId.SYNTHETIC_FACTORS),
        model=ModelConfig(noise_dim=8, code_cardinality=3, hidden_dim=32, base_channels=8),
        objective=ObjectiveConfig(kind=kind, sc=sc),
        run=RunConfig(**run_values),
    )


@pytest.fixture()
def tiny_cfg():
    return tiny_config()
