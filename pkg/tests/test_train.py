"""Tests for train.py: loop bookkeeping, reproducibility, resume and step timing.

All runs use the synthetic-factors dataset and tiny networks on the CPU.
"""

import math

import pytest
import torch

from src.errors import ConfigurationError, InvalidArgumentError, TrainingAborted
from src.models import ObjectiveKind
from src.train import StepTiming, Trainer, measure_step_time, train_model
from tests.conftest import tiny_config


def same_weights(a, b) -> bool:
    return all(torch.allclose(pa, pb, atol=1e-6) for pa, pb in zip(a.parameters(), b.parameters()))


class TestTrainModel:
    @pytest.mark.parametrize("kind", list(ObjectiveKind))
    def test_every_objective_trains(self, kind, synthetic_handle):
        result = train_model(tiny_config(kind), handle=synthetic_handle)
        assert result.steps == 6
        assert len(result.log) == 6
        for record in result.log:
            assert math.isfinite(record["d_loss"]) and math.isfinite(record["g_loss"])
        has_sc = kind in (ObjectiveKind.SCGAN, ObjectiveKind.MODIFIED)
        assert (result.log[-1]["sc"] is not None) == has_sc

    def test_baselines_spend_nothing_on_pairs(self, synthetic_handle):
        result = train_model(tiny_config(ObjectiveKind.CGAN), handle=synthetic_handle)
        assert all(r["sc"] is None and r["timing"]["pair_evaluations"] == 0 for r in result.log)

    def test_modified_pair_count(self, synthetic_handle):
        result = train_model(tiny_config(), handle=synthetic_handle)
        assert result.log[0]["pair_evaluations"] == 24
        assert "contribution" in result.log[0]

    def test_same_seed_same_losses(self, synthetic_handle):
        first = train_model(tiny_config(max_steps=4), handle=synthetic_handle)
        second = train_model(tiny_config(max_steps=4), handle=synthetic_handle)
        for a, b in zip(first.log, second.log):
            assert a["d_loss"] == pytest.approx(b["d_loss"], abs=1e-6)
            assert a["g_loss"] == pytest.approx(b["g_loss"], abs=1e-6)
        assert same_weights(first.bundle.generator, second.bundle.generator)

    def test_writes_log_and_checkpoints(self, tmp_path, synthetic_handle):
        result = train_model(tiny_config(checkpoint_every=3, log_every=2), out_dir=tmp_path,
                             handle=synthetic_handle)
        names = sorted(p.name for p in (tmp_path / "checkpoints").iterdir())
        assert names == ["final.pt", "step_0000003.pt", "step_0000006.pt"]
        assert result.last_checkpoint == tmp_path / "checkpoints" / "final.pt"
        steps = [r["step"] for r in result.log]
        assert steps == [1, 2, 4, 6]
        assert (tmp_path / "train_log.jsonl").read_text().count("\n") == 4

    def test_resume_continues_exactly(self, tmp_path, synthetic_handle):
        cfg = tiny_config(checkpoint_every=3)
        straight = train_model(cfg, out_dir=tmp_path / "a", handle=synthetic_handle)
        resumed = train_model(cfg, out_dir=tmp_path / "b", handle=synthetic_handle,
                              resume_from=tmp_path / "a" / "checkpoints" / "step_0000003.pt")
        assert resumed.steps == 6
        assert [r["step"] for r in resumed.log] == [4, 5, 6]
        for a, b in zip(straight.log[3:], resumed.log):
            assert a["g_loss"] == pytest.approx(b["g_loss"], abs=1e-5)
        assert same_weights(straight.bundle.generator, resumed.bundle.generator)

    def test_non_finite_loss_aborts(self, tmp_path, synthetic_handle, monkeypatch):
        original = Trainer.train_step

        def poisoned(self, real, labels, step):
            record = original(self, real, labels, step)
            if step == 3:
                record["g_loss"] = float("nan")
            return record

        monkeypatch.setattr(Trainer, "train_step", poisoned)
        with pytest.raises(TrainingAborted) as info:
            train_model(tiny_config(checkpoint_every=2), out_dir=tmp_path, handle=synthetic_handle)
        assert info.value.step == 3
        assert info.value.last_checkpoint == tmp_path / "checkpoints" / "step_0000002.pt"

    def test_batch_larger_than_dataset(self, synthetic_handle):
        with pytest.raises(ConfigurationError) as info:
            train_model(tiny_config(batch_size=5000), handle=synthetic_handle)
        assert info.value.key == "run.batch_size"

    def test_conditional_discriminator_needs_matching_classes(self, synthetic_handle):
        cfg = tiny_config(ObjectiveKind.CGAN)
        cfg.model.code_cardinality = 4
        with pytest.raises(ConfigurationError) as info:
            Trainer(cfg=cfg, handle=synthetic_handle)
        assert info.value.key == "model.code_cardinality"


class TestStepTiming:
    def test_mean_over_measured_steps(self, synthetic_handle):
        timing = measure_step_time(tiny_config(), warmup=1, measured=10, handle=synthetic_handle)
        parts = (timing.forward, timing.sc, timing.backward, timing.optimizer)
        assert all(p >= 0.0 for p in parts)
        assert timing.total == pytest.approx(sum(parts))
        assert timing.sc > 0.0
        assert timing.pair_evaluations == 24

    def test_baseline_has_no_pairs(self, synthetic_handle):
        timing = measure_step_time(tiny_config(ObjectiveKind.GAN), warmup=0, measured=10, handle=synthetic_handle)
        assert timing.pair_evaluations == 0

    def test_needs_ten_measured_steps(self, synthetic_handle):
        with pytest.raises(InvalidArgumentError):
            measure_step_time(tiny_config(), measured=5, handle=synthetic_handle)

    def test_arithmetic(self):
        total = StepTiming(forward=1.0, total=2.0, pair_evaluations=5) + StepTiming(forward=3.0, total=4.0)
        mean = total.scaled(0.5)
        assert mean.forward == 2.0 and mean.total == 3.0
        assert mean.pair_evaluations == 5
