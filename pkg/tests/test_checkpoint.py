"""Tests for checkpoint.py"""

import pytest
import torch

from src.checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from src.errors import CheckpointError
from src.helpers import state_dict_hash
from src.models import CodeKind, ObjectiveKind
from src.networks import ArchitectureDescriptor, build_bundle
from tests.conftest import tiny_config


def tiny_bundle(cfg, q_head=False):
    arch = ArchitectureDescriptor(channels=1, height=16, width=16, noise_dim=cfg.model.noise_dim,
                                  code_dim=cfg.model.code_cardinality, code_kind=CodeKind.DISCRETE,
                                  hidden_dim=cfg.model.hidden_dim, base_channels=cfg.model.base_channels,
                                  q_head=q_head)
    return build_bundle(arch, cfg.optimizer, seed=0)


class TestCheckpoint:
    def test_restores_weights_config_and_counters(self, tmp_path, tiny_cfg):
        bundle = tiny_bundle(tiny_cfg)
        path = save_checkpoint(tmp_path / "step_4.pt", bundle, tiny_cfg, step=4, epoch=1)
        loaded = load_checkpoint(path)
        assert loaded.step == 4 and loaded.epoch == 1
        assert loaded.config == tiny_cfg
        assert loaded.bundle.descriptor == bundle.descriptor
        assert state_dict_hash(loaded.bundle.generator.state_dict()) == state_dict_hash(bundle.generator.state_dict())
        assert loaded.bundle.opt_g is not None

    def test_q_head_and_optimizer_state(self, tmp_path):
        cfg = tiny_config(ObjectiveKind.INFOGAN)
        bundle = tiny_bundle(cfg, q_head=True)
        loss = sum(p.sum() for p in bundle.generator_parameters())
        loss.backward()
        bundle.opt_g.step()
        path = save_checkpoint(tmp_path / "ckpt.pt", bundle, cfg, step=1, epoch=0)
        loaded = load_checkpoint(path)
        assert state_dict_hash(loaded.bundle.q_head.state_dict()) == state_dict_hash(bundle.q_head.state_dict())
        assert loaded.bundle.opt_g.state_dict()["state"]

    def test_without_optimizers(self, tmp_path, tiny_cfg):
        path = save_checkpoint(tmp_path / "ckpt.pt", tiny_bundle(tiny_cfg), tiny_cfg, step=0, epoch=0)
        assert load_checkpoint(path, with_optimizers=False).bundle.opt_g is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.pt")

    def test_unknown_format_version(self, tmp_path, tiny_cfg):
        path = save_checkpoint(tmp_path / "ckpt.pt", tiny_bundle(tiny_cfg), tiny_cfg, step=0, epoch=0)
        payload = torch.load(path, weights_only=True)
        payload["format_version"] = FORMAT_VERSION + 1
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="Unsupported checkpoint format"):
            load_checkpoint(path)

    def test_descriptor_mismatch(self, tmp_path, tiny_cfg):
        bundle = tiny_bundle(tiny_cfg)
        path = save_checkpoint(tmp_path / "ckpt.pt", bundle, tiny_cfg, step=0, epoch=0)
        other = ArchitectureDescriptor.from_dict({**bundle.descriptor.to_dict(), "hidden_dim": 64})
        with pytest.raises(CheckpointError) as info:
            load_checkpoint(path, expected=other)
        assert info.value.key == "model"

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "ckpt.pt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError, match="Cannot read"):
            load_checkpoint(path)
