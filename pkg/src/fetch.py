"""Download the MNIST-family IDX archives with MD5 verification."""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import httpx

from .errors import IngestionError
from .models import DatasetId
from .settings import get_data_root, get_fetch_timeout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArchiveSpec:
    filename: str
    md5: str


_IDX_SPLITS = ("train-images", "train-labels", "t10k-images", "t10k-labels")

MNIST_FILES: Tuple[ArchiveSpec, ...] = (
    ArchiveSpec("train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
    ArchiveSpec("train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"),
    ArchiveSpec("t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"),
    ArchiveSpec("t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"),
)

FASHION_MNIST_FILES: Tuple[ArchiveSpec, ...] = (
    ArchiveSpec("train-images-idx3-ubyte.gz", "8d4fb7e6c68d591d4c3dfef9ec88bf0d"),
    ArchiveSpec("train-labels-idx1-ubyte.gz", "25c81989df183df01b3e8a0aad5dffbe"),
    ArchiveSpec("t10k-images-idx3-ubyte.gz", "bef4ecab320f06d8554ea6380940ec79"),
    ArchiveSpec("t10k-labels-idx1-ubyte.gz", "bb300cfdad3c16e7a12a480ee83cd310"),
)

MIRRORS: Dict[DatasetId, List[str]] = {
    DatasetId.MNIST: [
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
        "http://yann.lecun.com/exdb/mnist/",
    ],
    DatasetId.FASHION_MNIST: [
        "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    ],
}

ARCHIVES: Dict[DatasetId, Tuple[ArchiveSpec, ...]] = {
    DatasetId.MNIST: MNIST_FILES,
    DatasetId.FASHION_MNIST: FASHION_MNIST_FILES,
}


def md5sum(path: Path, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.md5()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(chunk_size), b""):
            digest.update(block)
    return digest.hexdigest()


def dataset_dir(dataset: DatasetId, root: Optional[Path] = None) -> Path:
    return Path(root or get_data_root()) / dataset.value


def verify_archive(path: Path, spec: ArchiveSpec) -> None:
    if not path.exists():
        raise IngestionError(f"Missing dataset file {path}", path=path)
    actual = md5sum(path)
    if actual != spec.md5:
        raise IngestionError(
            f"Checksum mismatch for {path}: expected md5 {spec.md5}, got {actual}", path=path
        )


class DatasetFetcher:
    """Fetch IDX archives into ``<root>/<dataset>/``, skipping verified files."""

    def __init__(self, root: Optional[Path] = None, timeout: Optional[float] = None,
                 client: Optional[httpx.Client] = None):
        self.root = Path(root or get_data_root())
        self.timeout = timeout if timeout is not None else get_fetch_timeout()
        self._client = client
        self._owns_client = client is None

    def __enter__(self) -> "DatasetFetcher":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _ensure_client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout, follow_redirects=True)
        return self._client

    def close(self) -> None:
        """Close the client this fetcher opened; injected clients stay open."""
        if self._client is not None and self._owns_client:
            self._client.close()
            self._client = None

    def fetch(self, dataset: DatasetId) -> Dict[str, Path]:
        """Make every archive of ``dataset`` present and verified; returns split -> path."""
        if dataset not in ARCHIVES:
            raise IngestionError(f"No download recipe for '{dataset.value}'")
        target = dataset_dir(dataset, self.root)
        target.mkdir(parents=True, exist_ok=True)
        paths = {}
        for split, spec in zip(_IDX_SPLITS, ARCHIVES[dataset]):
            path = target / spec.filename
            if path.exists() and md5sum(path) == spec.md5:
                logger.debug("%s already present and verified", path)
            else:
                self._download(dataset, spec, path)
            paths[split] = path
        return paths

    def _download(self, dataset: DatasetId, spec: ArchiveSpec, path: Path) -> None:
        client = self._ensure_client()
        errors = []
        for mirror in MIRRORS[dataset]:
            url = mirror + spec.filename
            try:
                response = client.get(url)
            except httpx.TimeoutException:
                errors.append(f"{url}: timed out after {self.timeout}s")
                continue
            except httpx.HTTPError as e:
                errors.append(f"{url}: {e}")
                continue
            if response.status_code >= 400:
                errors.append(f"{url}: HTTP {response.status_code}")
                continue
            tmp = path.with_suffix(path.suffix + ".part")
            tmp.write_bytes(response.content)
            try:
                verify_archive(tmp, spec)
            except IngestionError as e:
                tmp.unlink(missing_ok=True)
                errors.append(f"{url}: {e}")
                continue
            tmp.replace(path)
            logger.info("Downloaded %s", url)
            return
        logger.error("All mirrors failed for %s", spec.filename)
        raise IngestionError(
            f"Could not download {spec.filename} for {dataset.value}: " + "; ".join(errors), path=path
        )
