"""Sample grids: one code per column, or a code sweep across columns."""

import logging
from pathlib import Path

import torch
from torchvision.utils import make_grid, save_image

from .errors import ConfigurationError, InvalidArgumentError
from .helpers import make_generator
from .latent import LatentBatch, one_hot, sample_codes, sample_noise
from .models import CodeKind, GridMode, ModelConfig
from .networks import ModelBundle

logger = logging.getLogger(__name__)


def sweep_values(low: float, high: float, steps: int) -> torch.Tensor:
    """low + t * (high - low) / (steps - 1) for t = 0 .. steps-1."""
    if steps == 1:
        return torch.tensor([low])
    t = torch.arange(steps, dtype=torch.float32)
    return low + t * (high - low) / (steps - 1)


def grid_latents(model: ModelConfig, mode: GridMode, rows: int, cols: int, seed: int,
                 slot: int = 0) -> LatentBatch:
    """Row-major latents for a rows x cols grid; z is shared along each row."""
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"Grid dimensions must be >= 1, got {rows}x{cols}")
    spec = model.code_spec()
    generator = make_generator(seed)
    z = sample_noise(model.noise_spec(), rows, generator).repeat_interleave(cols, dim=0)

    if mode == GridMode.FIX_C_PER_COLUMN:
        if spec.kind == CodeKind.DISCRETE:
            column_codes = one_hot(torch.arange(cols) % spec.cardinality, spec.cardinality)
        else:
            column_codes = sample_codes(spec, cols, generator)
        c = column_codes.repeat(rows, 1)
    else:
        if spec.kind != CodeKind.CONTINUOUS:
            raise ConfigurationError("continuous code required for a code sweep", key="model.code_kind")
        if not 0 <= slot < spec.cardinality:
            raise InvalidArgumentError(f"Sweep slot {slot} is outside the {spec.cardinality} code slots")
        row_codes = sample_codes(spec, rows, generator).repeat_interleave(cols, dim=0)
        row_codes[:, slot] = sweep_values(spec.low, spec.high, cols).repeat(rows)
        c = row_codes
    return LatentBatch(z=z, c=c, spec=spec)


def emit_sample_grid(
    bundle: ModelBundle,
    model: ModelConfig,
    mode: GridMode,
    rows: int,
    cols: int,
    seed: int,
    path: Path,
    slot: int = 0,
) -> Path:
    """Render a grid PNG; same bundle, mode and seed give a byte-identical file."""
    latent = grid_latents(model, mode, rows, cols, seed, slot).to(bundle.device)
    was_training = bundle.generator.training
    bundle.generator.eval()
    try:
        with torch.no_grad():
            images = bundle.generator(latent.z, latent.c)
    finally:
        bundle.generator.train(was_training)
    grid = make_grid(((images + 1.0) / 2.0).clamp(0.0, 1.0).cpu(), nrow=cols, padding=2)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(grid, path)
    logger.info("Sample grid (%s, %dx%d) written to %s", mode.value, rows, cols, path)
    return path


def emit_run_grids(bundle: ModelBundle, model: ModelConfig, rows: int, cols: int, seed: int,
                   out_dir: Path) -> list:
    """Grids written at the end of a training run; the sweep only for continuous codes."""
    paths = [emit_sample_grid(bundle, model, GridMode.FIX_C_PER_COLUMN, rows, cols, seed,
                              Path(out_dir) / "grid_fix_c.png")]
    if model.code_kind == CodeKind.CONTINUOUS:
        paths.append(emit_sample_grid(bundle, model, GridMode.SWEEP_C, rows, cols, seed,
                                      Path(out_dir) / "grid_sweep_c.png"))
    return paths
