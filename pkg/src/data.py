"""Dataset ingestion: IDX parsing, torchvision plug-ins and deterministic batching.

Images are kept as uint8 [N, C, H, W] and scaled to [-1, 1] per batch, the
generator's tanh range. Shuffling uses one permutation per (seed, epoch), so
batch order is reproducible and independent of how far a run has progressed.
"""

import gzip
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Tuple, Union

import numpy as np
import torch

from .errors import ConfigurationError, IngestionError
from .fetch import ARCHIVES, DatasetFetcher, dataset_dir, verify_archive
from .helpers import derive_seed
from .models import DatasetConfig, DatasetId
from .settings import get_data_root
from .synthetic import SyntheticFactors

logger = logging.getLogger(__name__)

_IMAGE_MAGIC = 2051
_LABEL_MAGIC = 2049

CELEBA_SIZE = 64
_CELEBA_CROP = 178


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------

def _read_gz(path: Path) -> bytes:
    try:
        with gzip.open(path, "rb") as f:
            return f.read()
    except FileNotFoundError:
        raise IngestionError(f"Missing dataset file {path}", path=path) from None
    except (OSError, EOFError) as e:
        raise IngestionError(f"Corrupt dataset file {path}: {e}", path=path) from e


def read_idx_images(path: Path) -> np.ndarray:
    """uint8 images [N, 1, rows, cols] from a gzipped IDX3 file."""
    raw = _read_gz(path)
    if len(raw) < 16:
        raise IngestionError(f"Truncated IDX header in {path}", path=path)
    magic, count, rows, cols = np.frombuffer(raw[:16], dtype=">i4")
    if magic != _IMAGE_MAGIC:
        raise IngestionError(f"{path} is not an IDX image file (magic {magic})", path=path)
    expected = int(count) * int(rows) * int(cols)
    if len(raw) - 16 != expected:
        raise IngestionError(f"{path} holds {len(raw) - 16} pixel bytes, expected {expected}", path=path)
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(int(count), 1, int(rows), int(cols)).copy()


def read_idx_labels(path: Path) -> np.ndarray:
    raw = _read_gz(path)
    if len(raw) < 8:
        raise IngestionError(f"Truncated IDX header in {path}", path=path)
    magic, count = np.frombuffer(raw[:8], dtype=">i4")
    if magic != _LABEL_MAGIC:
        raise IngestionError(f"{path} is not an IDX label file (magic {magic})", path=path)
    if len(raw) - 8 != int(count):
        raise IngestionError(f"{path} holds {len(raw) - 8} labels, expected {count}", path=path)
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

class ArraySplit:
    """In-memory uint8 images plus integer labels."""

    def __init__(self, images: np.ndarray, labels: np.ndarray):
        if len(images) != len(labels):
            raise IngestionError(f"{len(images)} images but {len(labels)} labels")
        self.images = images
        self.labels = labels

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def get(self, indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.images[indices], self.labels[indices]

    def subset(self, indices: np.ndarray) -> "ArraySplit":
        return ArraySplit(self.images[indices], self.labels[indices])


class VisionSplit:
    """Lazily loaded torchvision dataset, decoded to uint8 CHW arrays on access."""

    def __init__(self, dataset, image_shape: Tuple[int, int, int], indices: Optional[np.ndarray] = None):
        self.dataset = dataset
        self._image_shape = image_shape
        self.indices = np.arange(len(dataset)) if indices is None else indices

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return self._image_shape

    def get(self, indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        images, labels = [], []
        for i in indices:
            image, label = self.dataset[int(self.indices[i])]
            images.append(np.asarray(image, dtype=np.uint8).transpose(2, 0, 1))
            labels.append(int(label) if np.ndim(label) == 0 else 0)
        return np.stack(images), np.asarray(labels, dtype=np.int64)

    def subset(self, indices: np.ndarray) -> "VisionSplit":
        return VisionSplit(self.dataset, self._image_shape, self.indices[indices])


Split = Union[ArraySplit, VisionSplit]


def to_model_range(images: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(images.astype(np.float32) / 127.5 - 1.0)


@dataclass
class DatasetHandle:
    id: DatasetId
    train: Split
    test: Optional[Split] = None
    num_classes: Optional[int] = None

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return self.train.image_shape

    def split(self, name: str) -> Split:
        if name == "train":
            return self.train
        if self.test is None:
            raise IngestionError(f"'{self.id.value}' has no test split")
        return self.test

    def batches_per_epoch(self, batch_size: int) -> int:
        return len(self.train) // batch_size

    def epoch_order(self, epoch: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(seed, epoch))
        return rng.permutation(len(self.train))

    def batches(self, batch_size: int, epoch: int, seed: int,
                start: int = 0) -> Iterator[Tuple[torch.Tensor, torch.Tensor]]:
        """Shuffled (images in [-1, 1], labels) batches; the ragged tail is dropped.

        ``start`` skips that many batches, for resuming mid-epoch.
        """
        order = self.epoch_order(epoch, seed)
        for b in range(start, self.batches_per_epoch(batch_size)):
            images, labels = self.train.get(order[b * batch_size:(b + 1) * batch_size])
            yield to_model_range(images), torch.from_numpy(labels)

    def images(self, split: str = "train", limit: Optional[int] = None,
               seed: int = 0) -> Tuple[torch.Tensor, torch.Tensor]:
        """Up to ``limit`` images of a split in [-1, 1], drawn by a seeded shuffle."""
        data = self.split(split)
        order = np.random.default_rng(seed).permutation(len(data))
        if limit is not None:
            order = order[:limit]
        images, labels = data.get(np.sort(order))
        return to_model_range(images), torch.from_numpy(labels)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _ingest_idx(dataset: DatasetId, root: Path, download: bool) -> DatasetHandle:
    if download:
        with DatasetFetcher(root=root) as fetcher:
            paths = fetcher.fetch(dataset)
    else:
        directory = dataset_dir(dataset, root)
        paths = {}
        for split, spec in zip(("train-images", "train-labels", "t10k-images", "t10k-labels"), ARCHIVES[dataset]):
            path = directory / spec.filename
            verify_archive(path, spec)
            paths[split] = path
    train = ArraySplit(read_idx_images(paths["train-images"]), read_idx_labels(paths["train-labels"]))
    test = ArraySplit(read_idx_images(paths["t10k-images"]), read_idx_labels(paths["t10k-labels"]))
    return DatasetHandle(id=dataset, train=train, test=test, num_classes=10)


def _ingest_cifar10(root: Path, download: bool) -> DatasetHandle:
    from torchvision import datasets

    try:
        data = datasets.CIFAR10(root=str(root / "cifar10"), train=True, download=download)
    except RuntimeError as e:
        raise IngestionError(f"CIFAR10 not available under {root / 'cifar10'}: {e}", path=root / "cifar10") from e
    images = np.ascontiguousarray(data.data.transpose(0, 3, 1, 2))
    return DatasetHandle(
        id=DatasetId.CIFAR10,
        train=ArraySplit(images, np.asarray(data.targets, dtype=np.int64)),
        num_classes=10,
    )


def _ingest_celeba(root: Path, download: bool) -> DatasetHandle:
    from torchvision import datasets, transforms

    transform = transforms.Compose([transforms.CenterCrop(_CELEBA_CROP), transforms.Resize(CELEBA_SIZE)])
    try:
        data = datasets.CelebA(root=str(root / "celeba"), split="train", target_type="identity",
                               transform=transform, download=download)
    except RuntimeError as e:
        raise IngestionError(f"CelebA not available under {root / 'celeba'}: {e}", path=root / "celeba") from e
    # No class labels are used; identities are only a placeholder target
    return DatasetHandle(id=DatasetId.CELEBA, train=VisionSplit(data, (3, CELEBA_SIZE, CELEBA_SIZE)))


def _ingest_synthetic() -> DatasetHandle:
    factors = SyntheticFactors()
    images, labels = factors.training_arrays()
    test_images, test_labels = factors.training_arrays(repeats=4, seed=1)
    return DatasetHandle(
        id=DatasetId.SYNTHETIC_FACTORS,
        train=ArraySplit(images, labels),
        test=ArraySplit(test_images, test_labels),
        num_classes=factors.factor_sizes[0],
    )


def ingest_dataset(
    dataset: Union[DatasetId, DatasetConfig],
    root: Optional[Path] = None,
    download: bool = True,
    seed: int = 0,
) -> DatasetHandle:
    """Load a dataset, fetching it first when needed and allowed.

    A ``DatasetConfig`` may carry a root and a subset size; the subset keeps
    the first N train images of a seeded shuffle.
    """
    subset = None
    if isinstance(dataset, DatasetConfig):
        root = root or (Path(dataset.root).expanduser() if dataset.root else None)
        subset = dataset.subset
        dataset = dataset.id
    root = Path(root or get_data_root())

    if dataset in (DatasetId.MNIST, DatasetId.FASHION_MNIST):
        handle = _ingest_idx(dataset, root, download)
    elif dataset == DatasetId.CIFAR10:
        handle = _ingest_cifar10(root, download)
    elif dataset == DatasetId.CELEBA:
        handle = _ingest_celeba(root, download)
    elif dataset == DatasetId.SYNTHETIC_FACTORS:
        handle = _ingest_synthetic()
    else:
        raise ConfigurationError(f"Unknown dataset '{dataset}'", key="dataset.id")

    if subset is not None:
        if subset > len(handle.train):
            raise ConfigurationError(
                f"dataset.subset={subset} exceeds the {len(handle.train)} training images", key="dataset.subset"
            )
        keep = np.sort(np.random.default_rng(seed).permutation(len(handle.train))[:subset])
        handle.train = handle.train.subset(keep)

    logger.info("Ingested %s: %d train images%s, shape %s", dataset.value, len(handle.train),
                f", {len(handle.test)} test" if handle.test is not None else "", handle.image_shape)
    return handle
