"""Metric runners for trained checkpoints.

Each runner takes a loaded ``Checkpoint`` plus the evaluation config and
returns a ``MetricReport``. Generated samples are drawn from a seeded latent
stream so the same checkpoint, metric and seed reproduce the same report.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import torch
import torch.nn.functional as F

from ..checkpoint import Checkpoint
from ..config import EvalConfig, train_config_to_dict
from ..constraint import class_ssim_summary
from ..data import DatasetHandle, ingest_dataset
from ..errors import ConfigurationError
from ..helpers import content_hash, derive_seed, make_generator, to_jsonable
from ..latent import sample_latent
from ..models import CodeKind, DatasetId, MetricName, ModelConfig, RepresentationKind
from ..networks import ModelBundle
from ..ssim import ImageBatch
from ..synthetic import SyntheticFactors
from .extractor import get_feature_extractor
from .factorvae import GeneratorFactors, evaluate_factorvae, q_head_representation, train_posthoc_encoder
from .fid import fid
from .parzen import parzen_loglik
from .report import MetricReport

logger = logging.getLogger(__name__)


def generate_images(bundle: ModelBundle, model: ModelConfig, n: int, seed: int = 0,
                    batch_size: int = 500) -> Tuple[torch.Tensor, torch.Tensor]:
    """``n`` generated images in [-1, 1] on the CPU, with their codes."""
    generator = make_generator(seed)
    bundle.generator.eval()
    images, codes = [], []
    with torch.no_grad():
        for start in range(0, n, batch_size):
            latent = sample_latent(model.noise_spec(), model.code_spec(), min(batch_size, n - start),
                                   generator=generator)
            out = bundle.generator(latent.z.to(bundle.device), latent.c.to(bundle.device))
            images.append(out.cpu())
            codes.append(latent.c)
    return torch.cat(images), torch.cat(codes)


def class_separation(bundle: ModelBundle, model: ModelConfig, n: int = 200,
                     seed: int = 0) -> Dict[str, Optional[float]]:
    """Mean SSIM of generated pairs sharing a class code and of pairs that do not."""
    if model.code_kind != CodeKind.DISCRETE:
        return {"intra_class_ssim": None, "inter_class_ssim": None}
    images, codes = generate_images(bundle, model, n, seed=derive_seed(seed, 3))
    intra, inter = class_ssim_summary(ImageBatch(images), codes.argmax(dim=1))
    return {"intra_class_ssim": intra, "inter_class_ssim": inter}


def _model_hash(checkpoint: Checkpoint) -> str:
    return content_hash(train_config_to_dict(checkpoint.config))


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def run_parzen(checkpoint: Checkpoint, cfg: EvalConfig, handle: DatasetHandle, seed: int = 0) -> MetricReport:
    model = checkpoint.config.model
    generated, _ = generate_images(checkpoint.bundle, model, cfg.parzen.sample_count, seed=derive_seed(seed, 1))
    test, _ = handle.images("test")
    report = parzen_loglik(ImageBatch(generated), ImageBatch(test), cfg.parzen, seed=seed)
    report.details.update(checkpoint=str(checkpoint.path), step=checkpoint.step, model_hash=_model_hash(checkpoint))
    return report


def run_fid(
    checkpoint: Checkpoint,
    cfg: EvalConfig,
    handle: DatasetHandle,
    seed: int = 0,
    cache_dir: Optional[Path] = None,
    device: Optional[torch.device] = None,
) -> MetricReport:
    fid_cfg = cfg.fid
    extractor = get_feature_extractor(fid_cfg.extractor, handle, cache_dir=cache_dir, seed=fid_cfg.extractor_seed,
                                      epochs=fid_cfg.extractor_epochs, device=device)
    split = "test" if handle.test is not None else "train"
    real, _ = handle.images(split, limit=fid_cfg.sample_count, seed=seed)
    fake, _ = generate_images(checkpoint.bundle, checkpoint.config.model, fid_cfg.sample_count,
                              seed=derive_seed(seed, 2))
    ImageBatch(fake).check_range()
    value = fid(extractor(real).numpy(), extractor(fake).numpy())
    logger.info("FID %.4f (%s extractor, %d real %s / %d generated)",
                value, fid_cfg.extractor.value, len(real), split, len(fake))
    details = {
        "checkpoint": str(checkpoint.path),
        "step": checkpoint.step,
        "model_hash": _model_hash(checkpoint),
        "real_split": split,
        "real_count": len(real),
        "fake_count": len(fake),
        "extractor_accuracy": extractor.accuracy,
    }
    details.update(class_separation(checkpoint.bundle, checkpoint.config.model, seed=seed))
    return MetricReport(
        metric=MetricName.FID,
        value=value,
        config=to_jsonable(fid_cfg),
        seed=seed,
        extractor_hash=extractor.content_hash,
        details=details,
    )


def run_factor(checkpoint: Checkpoint, cfg: EvalConfig, seed: int = 0) -> MetricReport:
    factor_cfg = cfg.factor
    bundle, model = checkpoint.bundle, checkpoint.config.model
    kind = factor_cfg.representation

    if kind == RepresentationKind.IDENTITY:
        if checkpoint.config.dataset.id != DatasetId.SYNTHETIC_FACTORS:
            raise ConfigurationError(
                "The identity representation exists only for the synthetic-factors dataset",
                key="factor.representation",
            )
        dataset = SyntheticFactors()
        representation = dataset.decode
    else:
        dataset = GeneratorFactors(bundle, model, bins=factor_cfg.bins, seed=seed)
        if kind == RepresentationKind.Q_HEAD:
            q = q_head_representation(bundle)
            if model.code_kind == CodeKind.DISCRETE:
                def representation(images):
                    return F.softmax(q(images), dim=1)
            else:
                representation = q
        else:
            representation = train_posthoc_encoder(bundle, model, steps=factor_cfg.encoder_steps,
                                                   batch_size=factor_cfg.batch_size, seed=seed)

    result = evaluate_factorvae(
        representation,
        dataset,
        votes=factor_cfg.votes,
        batch_size=factor_cfg.batch_size,
        eval_votes=factor_cfg.eval_votes,
        variance_samples=factor_cfg.variance_samples,
        seed=seed,
    )
    return MetricReport(
        metric=MetricName.FACTOR,
        value=result.score,
        config=to_jsonable(factor_cfg),
        seed=seed,
        details={
            "checkpoint": str(checkpoint.path),
            "step": checkpoint.step,
            "model_hash": _model_hash(checkpoint),
            "factor_sizes": list(dataset.factor_sizes),
            "train_accuracy": result.train_accuracy,
            "active_dims": result.active_dims,
            "eval_votes": result.eval_votes,
        },
    )


def evaluate_checkpoint(
    checkpoint: Checkpoint,
    metric: MetricName,
    cfg: Optional[EvalConfig] = None,
    seed: int = 0,
    handle: Optional[DatasetHandle] = None,
    cache_dir: Optional[Path] = None,
    device: Optional[torch.device] = None,
) -> MetricReport:
    """Dispatch one metric; the dataset is ingested only when the metric needs it."""
    cfg = cfg or EvalConfig()
    metric = MetricName(metric)
    checkpoint.bundle.eval()
    if metric == MetricName.FACTOR:
        return run_factor(checkpoint, cfg, seed=seed)
    handle = handle or ingest_dataset(checkpoint.config.dataset, seed=checkpoint.config.run.seed)
    if metric == MetricName.PARZEN:
        return run_parzen(checkpoint, cfg, handle, seed=seed)
    return run_fid(checkpoint, cfg, handle, seed=seed, cache_dir=cache_dir, device=device)
