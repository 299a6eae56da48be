"""
Similarity-constraint GAN toolkit
GAN, CGAN, InfoGAN, SCGAN and the modified SSIM-contrastive SCGAN, with
Parzen, FID and FactorVAE evaluation
"""

__version__ = "1.0.0"
__description__ = "Similarity-constraint GAN training and evaluation toolkit"

from .constraint import evaluate_constraint, sc_modified, sc_original, subsample_pairs
from .latent import LatentBatch, code_agreement, sample_latent
from .models import CodeSpec, NoiseSpec, ObjectiveConfig, SCConfig, TrainConfig
from .ssim import ImageBatch, ssim_matrix, ssim_pair

__all__ = [
    "CodeSpec",
    "ImageBatch",
    "LatentBatch",
    "NoiseSpec",
    "ObjectiveConfig",
    "SCConfig",
    "TrainConfig",
    "code_agreement",
    "evaluate_constraint",
    "sample_latent",
    "sc_modified",
    "sc_original",
    "ssim_matrix",
    "ssim_pair",
    "subsample_pairs",
]
