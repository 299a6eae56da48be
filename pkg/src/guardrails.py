"""Run-safety guardrails for training and evaluation commands.

1. Output Containment: every file a command writes stays inside its output directory
2. Run Lock: one process per output directory
3. Finite-Loss Guard: abort on NaN/Inf, pointing at the last good checkpoint
4. Training Log: append-only JSON-lines record of logged steps
5. Out-of-Memory Guidance: CUDA OOM becomes an abort with a sizing hint
"""

import json
import logging
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import torch

from .errors import ConfigurationError, TrainingAborted
from .helpers import to_jsonable

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# 1. Output Containment
# ---------------------------------------------------------------------------

def ensure_within(root: Path, path: Path) -> Path:
    """Resolve ``path`` and refuse it unless it lies inside ``root``."""
    root_resolved = Path(root).resolve()
    resolved = Path(path).resolve()
    if resolved != root_resolved and root_resolved not in resolved.parents:
        raise ConfigurationError(f"Refusing to write {resolved}: outside output directory {root_resolved}")
    return resolved


# ---------------------------------------------------------------------------
# 2. Run Lock
# ---------------------------------------------------------------------------

LOCK_NAME = ".lock"


@dataclass
class RunLock:
    """Exclusive ``<out>/.lock`` created with O_EXCL; holds pid and start time."""
    directory: Path
    _path: Optional[Path] = field(default=None, repr=False)

    @property
    def path(self) -> Path:
        return Path(self.directory) / LOCK_NAME

    def acquire(self) -> "RunLock":
        Path(self.directory).mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            if self._holder_is_gone():
                logger.warning("Removing stale run lock %s (%s)", self.path, self._read_holder())
                self.path.unlink(missing_ok=True)
                return self.acquire()
            holder = self._read_holder()
            raise ConfigurationError(
                f"Output directory {self.directory} is locked by another run ({holder}); "
                f"remove {self.path} if that run is gone"
            ) from None
        with os.fdopen(fd, "w") as f:
            json.dump({"pid": os.getpid(), "started": datetime.now(timezone.utc).isoformat()}, f)
        self._path = self.path
        logger.debug("Acquired run lock %s", self.path)
        return self

    def release(self) -> None:
        if self._path is None:
            return
        try:
            self._path.unlink()
        except FileNotFoundError:
            logger.warning("Run lock %s vanished before release", self._path)
        self._path = None

    def _holder_is_gone(self) -> bool:
        """True when the lock names a pid on this host that no longer exists."""
        try:
            pid = int(json.loads(self.path.read_text())["pid"])
        except (OSError, ValueError, KeyError, TypeError):
            return False
        if pid == os.getpid():
            return False
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return True
        except PermissionError:
            return False
        return False

    def _read_holder(self) -> str:
        try:
            data = json.loads(self.path.read_text())
            return f"pid {data.get('pid')}, started {data.get('started')}"
        except (OSError, ValueError):
            return "unknown holder"

    def __enter__(self) -> "RunLock":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()


# ---------------------------------------------------------------------------
# 3. Finite-Loss Guard
# ---------------------------------------------------------------------------

def check_finite(step: int, last_checkpoint: Optional[Path] = None, **losses: float) -> None:
    """Raise TrainingAborted if any named loss is NaN or infinite."""
    bad = {name: value for name, value in losses.items() if not math.isfinite(value)}
    if not bad:
        return
    where = f"; last good checkpoint: {last_checkpoint}" if last_checkpoint else "; no checkpoint written yet"
    detail = ", ".join(f"{k}={v}" for k, v in bad.items())
    logger.error("Non-finite loss at step %d (%s)", step, detail)
    raise TrainingAborted(f"Non-finite loss at step {step} ({detail}){where}",
                          last_checkpoint=last_checkpoint, step=step)


# ---------------------------------------------------------------------------
# 4. Training Log
# ---------------------------------------------------------------------------

@dataclass
class TrainingLog:
    """Append-only JSON lines, one object per logged step.

    Write failures are logged, never raised, so a full disk does not kill a run.
    """
    path: Optional[Path] = None

    def write(self, record: Dict[str, Any]) -> None:
        if self.path is None:
            return
        try:
            with open(self.path, "a") as f:
                f.write(json.dumps(to_jsonable(record)) + "\n")
        except OSError as e:
            logger.warning("Failed to write training log to %s: %s", self.path, e)

    def read(self) -> list:
        if self.path is None or not Path(self.path).exists():
            return []
        with open(self.path) as f:
            return [json.loads(line) for line in f if line.strip()]

    def truncate_after(self, step: int) -> None:
        """Drop records past ``step`` (used when resuming from a checkpoint)."""
        records = [r for r in self.read() if r.get("step", 0) <= step]
        if self.path is None:
            return
        with open(self.path, "w") as f:
            for r in records:
                f.write(json.dumps(r) + "\n")


# ---------------------------------------------------------------------------
# 5. Out-of-Memory Guidance
# ---------------------------------------------------------------------------

@contextmanager
def oom_guard(step: int, last_checkpoint: Optional[Path] = None) -> Iterator[None]:
    try:
        yield
    except torch.cuda.OutOfMemoryError as e:
        logger.error("CUDA out of memory at step %d", step)
        raise TrainingAborted(
            f"Out of GPU memory at step {step}: lower run.batch_size or model.hidden_dim "
            f"(or set SCGAN_DEVICE=cpu). {e}",
            last_checkpoint=last_checkpoint,
            step=step,
        ) from e
