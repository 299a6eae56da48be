"""Tests for MetricReport and report comparison."""

import pytest

from src.errors import InvalidArgumentError, NumericalError
from src.metrics.report import MetricReport, compare_reports, comparability_warning
from src.models import MetricName


class TestMetricReport:
    def test_format_line(self):
        assert MetricReport(metric=MetricName.FACTOR, value=1.0).format_line() == "factorvae_score: 1.0000"
        line = MetricReport(metric=MetricName.PARZEN, value=-12.5, uncertainty=0.25).format_line()
        assert line == "parzen_loglik: -12.5000 ± 0.2500"

    def test_write_read(self, tmp_path):
        report = MetricReport(metric=MetricName.FID, value=3.5, config={"sample_count": 100},
                              extractor_hash="abc", details={"real_split": "test"})
        loaded = MetricReport.read(report.write(tmp_path / "report.json"))
        assert loaded.metric == MetricName.FID
        assert loaded.value == 3.5
        assert loaded.config_hash == report.config_hash
        assert loaded.details == {"real_split": "test"}

    def test_config_hash_follows_config(self):
        a = MetricReport(metric=MetricName.FID, value=1.0, config={"sample_count": 10})
        b = MetricReport(metric=MetricName.FID, value=2.0, config={"sample_count": 10})
        c = MetricReport(metric=MetricName.FID, value=1.0, config={"sample_count": 20})
        assert a.config_hash == b.config_hash != c.config_hash

    def test_non_finite_value(self):
        with pytest.raises(NumericalError):
            MetricReport(metric=MetricName.FID, value=float("nan"))

    def test_negative_uncertainty(self):
        with pytest.raises(InvalidArgumentError):
            MetricReport(metric=MetricName.PARZEN, value=1.0, uncertainty=-0.1)


class TestComparability:
    def test_same_extractor(self):
        a = MetricReport(metric=MetricName.FID, value=1.0, extractor_hash="h1")
        b = MetricReport(metric=MetricName.FID, value=2.0, extractor_hash="h1")
        assert comparability_warning(a, b) is None

    def test_different_extractor_warns(self, caplog):
        a = MetricReport(metric=MetricName.FID, value=1.0, extractor_hash="h1")
        b = MetricReport(metric=MetricName.FID, value=2.0, extractor_hash="h2")
        message = compare_reports(a, b)
        assert "not comparable" in message
        assert "not comparable" in caplog.text

    def test_different_metrics(self):
        a = MetricReport(metric=MetricName.FID, value=1.0)
        b = MetricReport(metric=MetricName.PARZEN, value=1.0)
        assert "different metrics" in comparability_warning(a, b)
