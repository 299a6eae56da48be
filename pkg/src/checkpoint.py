"""Versioned checkpoint container.

A checkpoint holds the architecture descriptor, the resolved training config,
G/D/Q parameters, both optimizer states and the step/epoch counters. All
randomness in training is derived from (seed, step) or (seed, epoch), so no
RNG state needs saving for a bit-exact resume.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import torch

from .config import train_config_from_dict, train_config_to_dict
from .errors import CheckpointError, ConfigurationError
from .models import TrainConfig
from .networks import ArchitectureDescriptor, ModelBundle, build_bundle

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    bundle: ModelBundle
    config: TrainConfig
    step: int
    epoch: int
    path: Optional[Path] = None


def save_checkpoint(path: Path, bundle: ModelBundle, cfg: TrainConfig, step: int, epoch: int) -> Path:
    payload: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "descriptor": bundle.descriptor.to_dict(),
        "config": train_config_to_dict(cfg),
        "generator": bundle.generator.state_dict(),
        "discriminator": bundle.discriminator.state_dict(),
        "q_head": bundle.q_head.state_dict() if bundle.q_head is not None else None,
        "opt_g": bundle.opt_g.state_dict() if bundle.opt_g is not None else None,
        "opt_d": bundle.opt_d.state_dict() if bundle.opt_d is not None else None,
        "step": step,
        "epoch": epoch,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    logger.info("Checkpoint written to %s (step %d)", path, step)
    return path


def load_checkpoint(
    path: Path,
    device: Optional[torch.device] = None,
    expected: Optional[ArchitectureDescriptor] = None,
    with_optimizers: bool = True,
) -> Checkpoint:
    """Rebuild the bundle stored at ``path``.

    Raises CheckpointError for unreadable files, unknown format versions or a
    descriptor that differs from ``expected``.
    """
    path = Path(path)
    device = device or torch.device("cpu")
    try:
        payload = torch.load(path, map_location=device, weights_only=True)
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}") from None
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        found = payload.get("format_version") if isinstance(payload, dict) else None
        raise CheckpointError(f"Unsupported checkpoint format {found!r} in {path} (expected {FORMAT_VERSION})")

    try:
        descriptor = ArchitectureDescriptor.from_dict(payload["descriptor"])
        cfg = train_config_from_dict(payload["config"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Checkpoint {path} has a malformed header: {e}") from e
    if expected is not None and descriptor != expected:
        raise CheckpointError(
            f"Checkpoint architecture {descriptor.to_dict()} does not match the requested "
            f"{expected.to_dict()}", key="model"
        )

    bundle = build_bundle(descriptor, cfg.optimizer if with_optimizers else None, device=device)
    try:
        bundle.generator.load_state_dict(payload["generator"])
        bundle.discriminator.load_state_dict(payload["discriminator"])
        if bundle.q_head is not None:
            if payload.get("q_head") is None:
                raise CheckpointError(f"Checkpoint {path} has no Q-head weights")
            bundle.q_head.load_state_dict(payload["q_head"])
        if with_optimizers and payload.get("opt_g") is not None:
            bundle.opt_g.load_state_dict(payload["opt_g"])
            bundle.opt_d.load_state_dict(payload["opt_d"])
    except (RuntimeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise CheckpointError(f"Checkpoint {path} does not fit its own descriptor: {e}") from e

    logger.info("Loaded checkpoint %s (step %d, epoch %d)", path, payload["step"], payload["epoch"])
    return Checkpoint(bundle=bundle, config=cfg, step=int(payload["step"]), epoch=int(payload["epoch"]), path=path)
