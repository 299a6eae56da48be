"""Feature extractors for FID: a per-dataset classifier or raw pixels.

The classifier exposes its 128-d penultimate layer. Trained weights are
identified by a content hash so FID values are only compared when they were
computed with the same network.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import DatasetHandle
from ..errors import CheckpointError, ConfigurationError, TrainingFailure
from ..helpers import chunked, derive_seed, seed_everything, state_dict_hash
from ..models import DatasetId, FeatureExtractorId

logger = logging.getLogger(__name__)

FEATURE_DIM = 128
RAW_PIXELS_HASH = "raw-pixels"

ACCURACY_FLOORS: Dict[DatasetId, float] = {
    DatasetId.MNIST: 0.98,
    DatasetId.FASHION_MNIST: 0.88,
}


class ClassifierNet(nn.Module):
    def __init__(self, channels: int, height: int, width: int, classes: int):
        super().__init__()
        self.shape = (channels, height, width)
        self.body = nn.Sequential(
            nn.Conv2d(channels, 32, 3, padding=1),
            nn.ReLU(True),
            nn.MaxPool2d(2),
            nn.Conv2d(32, 64, 3, padding=1),
            nn.ReLU(True),
            nn.MaxPool2d(2),
            nn.Flatten(),
            nn.Linear(64 * (height // 4) * (width // 4), FEATURE_DIM),
            nn.ReLU(True),
        )
        self.head = nn.Linear(FEATURE_DIM, classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(x))


@dataclass
class FeatureExtractor:
    kind: FeatureExtractorId
    content_hash: str
    network: Optional[ClassifierNet] = None
    accuracy: Optional[float] = None
    dataset: Optional[DatasetId] = None

    @property
    def device(self) -> torch.device:
        if self.network is None:
            return torch.device("cpu")
        return next(self.network.parameters()).device

    def __call__(self, images: torch.Tensor, batch_size: int = 500) -> torch.Tensor:
        """Features [n, d] for images in [-1, 1]."""
        if self.network is None:
            return ((images + 1.0) / 2.0).flatten(1).double().cpu()
        self.network.eval()
        chunks = []
        with torch.no_grad():
            for block in chunked(images, batch_size):
                chunks.append(self.network.features(block.to(self.device)).double().cpu())
        return torch.cat(chunks)

    def save(self, path: Path) -> Path:
        if self.network is None:
            raise ConfigurationError("The raw-pixel extractor has nothing to save")
        net = self.network
        torch.save({
            "state": net.state_dict(),
            "shape": list(net.shape),
            "classes": net.head.out_features,
            "accuracy": self.accuracy,
            "dataset": self.dataset.value if self.dataset else None,
            "hash": self.content_hash,
        }, path)
        return Path(path)

    @classmethod
    def load(cls, path: Path, device: Optional[torch.device] = None) -> "FeatureExtractor":
        try:
            payload = torch.load(path, map_location=device or "cpu", weights_only=True)
            channels, height, width = payload["shape"]
            net = ClassifierNet(channels, height, width, payload["classes"])
            net.load_state_dict(payload["state"])
        except (OSError, KeyError, RuntimeError, ValueError) as e:
            raise CheckpointError(f"Cannot load feature extractor {path}: {e}") from e
        digest = state_dict_hash(net.state_dict())
        if digest != payload["hash"]:
            raise CheckpointError(f"Feature extractor {path} fails its content hash")
        return cls(
            kind=FeatureExtractorId.DATASET_CLASSIFIER,
            content_hash=digest,
            network=net.to(device or "cpu"),
            accuracy=payload.get("accuracy"),
            dataset=DatasetId(payload["dataset"]) if payload.get("dataset") else None,
        )


def raw_pixel_extractor() -> FeatureExtractor:
    return FeatureExtractor(kind=FeatureExtractorId.RAW_PIXELS, content_hash=RAW_PIXELS_HASH)


def evaluate_accuracy(net: ClassifierNet, images: torch.Tensor, labels: torch.Tensor,
                      device: torch.device, batch_size: int = 500) -> float:
    net.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            logits = net(images[start:start + batch_size].to(device))
            correct += int((logits.argmax(dim=1).cpu() == labels[start:start + batch_size]).sum())
    return correct / max(len(images), 1)


def train_feature_extractor(
    handle: DatasetHandle,
    seed: int = 0,
    epochs: int = 3,
    batch_size: int = 128,
    lr: float = 1e-3,
    device: Optional[torch.device] = None,
    floor: Optional[float] = None,
) -> FeatureExtractor:
    """Train the classifier and check it against the dataset's accuracy floor.

    Raises TrainingFailure (with diagnostics) when test accuracy misses the floor.
    """
    if handle.num_classes is None:
        raise ConfigurationError(
            f"The dataset-classifier extractor needs class labels; '{handle.id.value}' has none",
            key="fid.extractor",
        )
    device = device or torch.device("cpu")
    seed_everything(seed)
    torch.manual_seed(derive_seed(seed, 0))
    channels, height, width = handle.image_shape
    net = ClassifierNet(channels, height, width, handle.num_classes)
    net.to(device)
    optimizer = torch.optim.Adam(net.parameters(), lr=lr)

    for epoch in range(epochs):
        net.train()
        running, batches = 0.0, 0
        for images, labels in handle.batches(batch_size, epoch, derive_seed(seed, 1)):
            optimizer.zero_grad(set_to_none=True)
            loss = F.cross_entropy(net(images.to(device)), labels.to(device))
            loss.backward()
            optimizer.step()
            running += float(loss.detach())
            batches += 1
        logger.info("Extractor epoch %d/%d: loss %.4f", epoch + 1, epochs, running / max(batches, 1))

    split = "test" if handle.test is not None else "train"
    if split == "train":
        logger.warning("'%s' has no test split; extractor accuracy is measured on training data", handle.id.value)
    test_images, test_labels = handle.images(split)
    accuracy = evaluate_accuracy(net, test_images, test_labels, device)
    floor = ACCURACY_FLOORS.get(handle.id) if floor is None else floor
    if floor is not None and accuracy < floor:
        raise TrainingFailure(
            f"Feature extractor reached {accuracy:.4f} {split} accuracy on {handle.id.value}, below the {floor} floor",
            diagnostics={"accuracy": accuracy, "floor": floor, "epochs": epochs, "seed": seed},
        )
    digest = state_dict_hash(net.state_dict())
    logger.info("Feature extractor for %s: accuracy %.4f, hash %s", handle.id.value, accuracy, digest[:12])
    return FeatureExtractor(kind=FeatureExtractorId.DATASET_CLASSIFIER, content_hash=digest,
                            network=net, accuracy=accuracy, dataset=handle.id)


def get_feature_extractor(
    kind: FeatureExtractorId,
    handle: DatasetHandle,
    cache_dir: Optional[Path] = None,
    seed: int = 0,
    epochs: int = 3,
    device: Optional[torch.device] = None,
) -> FeatureExtractor:
    """Load a cached classifier for (dataset, seed, epochs) or train and cache one."""
    if kind == FeatureExtractorId.RAW_PIXELS:
        return raw_pixel_extractor()
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"extractor_{handle.id.value}_s{seed}_e{epochs}.pt"
        if path.exists():
            logger.info("Using cached feature extractor %s", path)
            return FeatureExtractor.load(path, device)
    extractor = train_feature_extractor(handle, seed=seed, epochs=epochs, device=device)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        extractor.save(path)
    return extractor
