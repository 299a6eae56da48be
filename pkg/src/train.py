"""Alternating D/G training loop, checkpoint cadence and step timing.

Every random draw is derived from the run seed: model init from (seed),
epoch order from (seed, epoch), latents from (seed, step, 1) and pair
subsampling from (seed, step, 2). Two runs with the same config therefore
log the same losses, and a run resumed from a checkpoint continues exactly
as if it had never stopped (deterministic kernels on).
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import torch

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import DatasetHandle, ingest_dataset
from .errors import ConfigurationError, InvalidArgumentError
from .guardrails import TrainingLog, check_finite, oom_guard
from .helpers import derive_seed, seed_everything
from .latent import LatentBatch, one_hot, sample_latent
from .models import TrainConfig
from .networks import ArchitectureDescriptor, ModelBundle, build_bundle
from .objectives import (
    build_diagnostics,
    constraint_term,
    discriminator_objective,
    generator_objective,
)
from .settings import deterministic_enabled, get_device

logger = logging.getLogger(__name__)

_INIT_STREAM = 0
_LATENT_STREAM = 1
_PAIR_STREAM = 2


@dataclass
class StepTiming:
    """Wall-clock seconds of one step and its parts.

    ``pair_evaluations`` is the SC pair count of the step, 0 without SC.
    """
    forward: float = 0.0
    sc: float = 0.0
    backward: float = 0.0
    optimizer: float = 0.0
    total: float = 0.0
    pair_evaluations: int = 0

    def __add__(self, other: "StepTiming") -> "StepTiming":
        return StepTiming(
            forward=self.forward + other.forward,
            sc=self.sc + other.sc,
            backward=self.backward + other.backward,
            optimizer=self.optimizer + other.optimizer,
            total=self.total + other.total,
            pair_evaluations=max(self.pair_evaluations, other.pair_evaluations),
        )

    def scaled(self, factor: float) -> "StepTiming":
        return StepTiming(
            forward=self.forward * factor,
            sc=self.sc * factor,
            backward=self.backward * factor,
            optimizer=self.optimizer * factor,
            total=self.total * factor,
            pair_evaluations=self.pair_evaluations,
        )

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class TrainResult:
    bundle: ModelBundle
    log: List[Dict[str, Any]]
    steps: int
    last_checkpoint: Optional[Path] = None
    run_dir: Optional[Path] = None


class _Clock:
    """Accumulates perf_counter spans, synchronizing CUDA before each reading."""

    def __init__(self, device: torch.device):
        self.cuda = device.type == "cuda"
        self.mark = self.now()

    def now(self) -> float:
        if self.cuda:
            torch.cuda.synchronize()
        return time.perf_counter()

    def lap(self) -> float:
        now = self.now()
        span, self.mark = now - self.mark, now
        return span


@dataclass
class Trainer:
    cfg: TrainConfig
    handle: DatasetHandle
    out_dir: Optional[Path] = None
    device: Optional[torch.device] = None
    bundle: Optional[ModelBundle] = None
    step: int = 0
    last_checkpoint: Optional[Path] = None
    records: List[Dict[str, Any]] = field(default_factory=list)

    def __post_init__(self):
        self.device = self.device or get_device(self.cfg.run.device)
        run = self.cfg.run
        if self.handle.batches_per_epoch(run.batch_size) < 1:
            raise ConfigurationError(
                f"run.batch_size={run.batch_size} exceeds the {len(self.handle.train)} training images",
                key="run.batch_size",
            )
        self.arch = ArchitectureDescriptor.build(self.handle.image_shape, self.cfg.model, self.cfg.objective)
        if self.arch.conditional_discriminator and self.handle.num_classes != self.arch.code_dim:
            raise ConfigurationError(
                f"A conditional discriminator needs model.code_cardinality equal to the "
                f"{self.handle.num_classes} dataset classes, got {self.arch.code_dim}",
                key="model.code_cardinality",
            )
        self.noise_spec = self.cfg.model.noise_spec()
        self.code_spec = self.cfg.model.code_spec()
        seed_everything(run.seed, run.deterministic and deterministic_enabled())
        if self.bundle is None:
            self.bundle = build_bundle(
                self.arch, self.cfg.optimizer, device=self.device, seed=derive_seed(run.seed, _INIT_STREAM)
            )
        self.log = TrainingLog(self.out_dir / "train_log.jsonl" if self.out_dir else None)
        if self.out_dir is not None:
            (self.out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)

    @classmethod
    def resume(cls, checkpoint: Checkpoint, handle: DatasetHandle, out_dir: Optional[Path] = None,
               device: Optional[torch.device] = None) -> "Trainer":
        trainer = cls(cfg=checkpoint.config, handle=handle, out_dir=out_dir, device=device,
                      bundle=checkpoint.bundle, step=checkpoint.step, last_checkpoint=checkpoint.path)
        if trainer.arch != checkpoint.bundle.descriptor:
            raise ConfigurationError("Checkpoint architecture does not match the dataset", key="model")
        trainer.log.truncate_after(checkpoint.step)
        return trainer

    # -----------------------------------------------------------------------

    def latent_for(self, step: int) -> LatentBatch:
        batch = self.cfg.run.batch_size
        seed = derive_seed(self.cfg.run.seed, step, _LATENT_STREAM)
        return sample_latent(self.noise_spec, self.code_spec, batch, seed=seed).to(self.device)

    def real_codes(self, labels: torch.Tensor) -> Optional[torch.Tensor]:
        if not self.arch.conditional_discriminator:
            return None
        return one_hot(labels, self.arch.code_dim).to(self.device)

    def train_step(self, real: torch.Tensor, labels: torch.Tensor, step: int) -> Dict[str, Any]:
        """One D update then one G update on a freshly generated batch."""
        bundle, objective = self.bundle, self.cfg.objective
        real = real.to(self.device)
        clock = _Clock(self.device)
        timing = StepTiming()

        latent = self.latent_for(step)
        fake = bundle.generator(latent.z, latent.c)
        bundle.opt_d.zero_grad(set_to_none=True)
        d_loss, d_real, d_fake = discriminator_objective(bundle, real, fake, self.real_codes(labels), latent.c)
        timing.forward += clock.lap()
        d_loss.backward()
        timing.backward += clock.lap()
        bundle.opt_d.step()
        timing.optimizer += clock.lap()

        bundle.opt_g.zero_grad(set_to_none=True)
        sc = constraint_term(fake, latent, objective, derive_seed(self.cfg.run.seed, step, _PAIR_STREAM))
        timing.sc += clock.lap()
        g_loss, parts = generator_objective(bundle, fake, latent, objective, sc=sc)
        timing.forward += clock.lap()
        g_loss.backward()
        timing.backward += clock.lap()
        bundle.opt_g.step()
        timing.optimizer += clock.lap()
        timing.total = timing.forward + timing.sc + timing.backward + timing.optimizer
        timing.pair_evaluations = sc.pair_evaluations if sc is not None else 0

        diagnostics = build_diagnostics(d_real, d_fake, parts, latent.spec)
        return {
            "step": step,
            "d_loss": float(d_loss.detach()),
            "g_loss": float(g_loss.detach()),
            **diagnostics.to_dict(),
            "timing": timing.to_dict(),
        }

    def checkpoint(self, name: str) -> Optional[Path]:
        if self.out_dir is None:
            return None
        epoch = self.step // self.handle.batches_per_epoch(self.cfg.run.batch_size)
        path = save_checkpoint(self.out_dir / "checkpoints" / name, self.bundle, self.cfg, self.step, epoch)
        self.last_checkpoint = path
        return path

    def run(self) -> TrainResult:
        run = self.cfg.run
        per_epoch = self.handle.batches_per_epoch(run.batch_size)
        total_steps = run.epochs * per_epoch
        if run.max_steps is not None:
            total_steps = min(total_steps, run.max_steps)
        start_epoch, start_batch = divmod(self.step, per_epoch)
        self.bundle.train()
        logger.info("Training %s on %s for %d steps (%d per epoch), starting at step %d",
                    self.cfg.objective.kind.value, self.handle.id.value, total_steps, per_epoch, self.step)

        for epoch in range(start_epoch, run.epochs):
            if self.step >= total_steps:
                break
            first = start_batch if epoch == start_epoch else 0
            for real, labels in self.handle.batches(run.batch_size, epoch, run.seed, start=first):
                if self.step >= total_steps:
                    break
                step = self.step + 1
                with oom_guard(step, self.last_checkpoint):
                    record = self.train_step(real, labels, step)
                record["epoch"] = epoch
                check_finite(step, self.last_checkpoint, d_loss=record["d_loss"], g_loss=record["g_loss"])
                self.step = step
                if step == 1 or step % run.log_every == 0:
                    self.records.append(record)
                    self.log.write(record)
                    logger.debug("step %d d_loss=%.4f g_loss=%.4f sc=%s",
                                 step, record["d_loss"], record["g_loss"], record["sc"])
                if step % run.checkpoint_every == 0:
                    self.checkpoint(f"step_{step:07d}.pt")
            logger.info("Epoch %d finished at step %d", epoch + 1, self.step)

        self.checkpoint("final.pt")
        return TrainResult(bundle=self.bundle, log=self.records, steps=self.step,
                           last_checkpoint=self.last_checkpoint, run_dir=self.out_dir)


def train_model(
    cfg: TrainConfig,
    out_dir: Optional[Path] = None,
    resume_from: Optional[Path] = None,
    handle: Optional[DatasetHandle] = None,
    device: Optional[torch.device] = None,
) -> TrainResult:
    """Run ``cfg`` to completion (or ``run.max_steps``) and return the bundle and log.

    With ``out_dir`` the per-step log, checkpoints and a final checkpoint are
    written there. ``resume_from`` continues from a checkpoint of this run.
    """
    handle = handle or ingest_dataset(cfg.dataset, seed=cfg.run.seed)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    if resume_from is not None:
        checkpoint = load_checkpoint(resume_from, device=device or get_device(cfg.run.device))
        checkpoint.config = cfg
        trainer = Trainer.resume(checkpoint, handle, out_dir=out_dir, device=device)
    else:
        trainer = Trainer(cfg=cfg, handle=handle, out_dir=out_dir, device=device)
    return trainer.run()


def measure_step_time(
    cfg: TrainConfig,
    warmup: int = 3,
    measured: int = 10,
    handle: Optional[DatasetHandle] = None,
    device: Optional[torch.device] = None,
) -> StepTiming:
    """Mean StepTiming over ``measured`` steps after discarding ``warmup`` steps."""
    if measured < 10:
        raise InvalidArgumentError(f"measured must be >= 10, got {measured}")
    if warmup < 0:
        raise InvalidArgumentError(f"warmup must be >= 0, got {warmup}")
    handle = handle or ingest_dataset(cfg.dataset, seed=cfg.run.seed)
    trainer = Trainer(cfg=cfg, handle=handle, device=device)
    trainer.bundle.train()

    total = StepTiming()
    step, epoch = 0, 0
    while step < warmup + measured:
        for real, labels in handle.batches(cfg.run.batch_size, epoch, cfg.run.seed):
            step += 1
            record = trainer.train_step(real, labels, step)
            if step > warmup:
                total = total + StepTiming(**record["timing"])
            if step >= warmup + measured:
                break
        epoch += 1
    mean = total.scaled(1.0 / measured)
    logger.info("Mean step time %.4fs (forward %.4f, sc %.4f, backward %.4f, optimizer %.4f)",
                mean.total, mean.forward, mean.sc, mean.backward, mean.optimizer)
    return mean
