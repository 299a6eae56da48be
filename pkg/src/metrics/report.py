"""MetricReport: one evaluation result plus everything needed to compare it."""

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from ..errors import InvalidArgumentError, NumericalError
from ..helpers import content_hash, to_jsonable
from ..models import MetricName
from ..settings import VERSION

logger = logging.getLogger(__name__)

_LABELS = {
    MetricName.PARZEN: "parzen_loglik",
    MetricName.FID: "fid",
    MetricName.FACTOR: "factorvae_score",
}


@dataclass
class MetricReport:
    metric: MetricName
    value: float
    uncertainty: Optional[float] = None     # standard error of the mean, where defined
    config: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    config_hash: str = ""
    extractor_hash: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)
    created_at: str = ""
    version: str = VERSION

    def __post_init__(self):
        self.metric = MetricName(self.metric)
        if not math.isfinite(self.value):
            raise NumericalError(f"{self.metric.value} value is not finite: {self.value}")
        if self.uncertainty is not None and not self.uncertainty >= 0:
            raise InvalidArgumentError(f"uncertainty must be >= 0, got {self.uncertainty}")
        if not self.config_hash:
            self.config_hash = content_hash(self.config)
        if not self.created_at:
            self.created_at = datetime.now(timezone.utc).isoformat()

    def format_line(self) -> str:
        label = _LABELS[self.metric]
        if self.uncertainty is None:
            return f"{label}: {self.value:.4f}"
        return f"{label}: {self.value:.4f} ± {self.uncertainty:.4f}"

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(self)

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        logger.info("Metric report written to %s", path)
        return path

    @classmethod
    def read(cls, path: Path) -> "MetricReport":
        with open(path) as f:
            return cls(**json.load(f))


def comparability_warning(report: MetricReport, baseline: MetricReport) -> Optional[str]:
    """Message explaining why two reports cannot be compared, or None."""
    if report.metric != baseline.metric:
        return f"Reports measure different metrics ({report.metric.value} vs {baseline.metric.value})"
    if report.extractor_hash != baseline.extractor_hash:
        return (
            f"{report.metric.value} values are not comparable: feature extractor hash "
            f"{str(report.extractor_hash)[:12]} differs from baseline {str(baseline.extractor_hash)[:12]}"
        )
    return None


def compare_reports(report: MetricReport, baseline: MetricReport) -> Optional[str]:
    """Log and return the comparability warning, if any."""
    message = comparability_warning(report, baseline)
    if message:
        logger.warning(message)
    return message
