"""
Tests for test-set evaluation and report rendering.
"""

import math

import numpy as np
import pytest

from gru_enhance.errors import InvalidConfigError, InvalidInputError
from gru_enhance.evalmetrics.evaluate import METRICS, CaseMetrics, MetricReport, evaluate
from gru_enhance.evalmetrics.report import CASE_COLUMNS, TABLE_COLUMNS, export_csv, format_table
from gru_enhance.mixgen.sampler import MixSpec
from gru_enhance.mixgen.testset import synth_testset

CASES = 4


@pytest.fixture
def dns_testset(manifest, tmp_path):
    """Four 1.5 s DNS cases spanning low and high SNR."""
    spec = MixSpec(duration_s=1.5, snr_range_db=(-10.0, 10.0), seed=3)
    out = tmp_path / "testset_dns"
    synth_testset(manifest, spec, CASES, out)
    return out


@pytest.fixture
def aec_testset(manifest, tmp_path):
    """Two 1.5 s echo cases."""
    spec = MixSpec(task="AEC", duration_s=1.5, max_delay_ms=50, seed=3)
    out = tmp_path / "testset_aec"
    synth_testset(manifest, spec, 2, out)
    return out


def _case(case_id, tag, value):
    return CaseMetrics(case_id, tag, -5.0 if tag == "low" else 5.0, value, value, 10 * value, value)


# ═══════════════════════════════════════════════════════════════════════════════
# Evaluation
# ═══════════════════════════════════════════════════════════════════════════════


class TestEvaluate:
    """Tests for evaluate."""

    def test_passthrough(self, dns_testset):
        """Test the noisy baseline scores every case."""
        report = evaluate(dns_testset, "passthrough", workers=2)
        assert len(report.cases) == CASES
        assert [c.case_id for c in report.cases] == [f"case_{i:06d}" for i in range(CASES)]
        for case in report.cases:
            assert 0.0 <= case.stoi <= 1.0
            assert case.tag == ("low" if case.snr_db < 0 else "high")
        assert len(report.group("low")) + len(report.group("high")) == CASES

    def test_model_identity_equals_passthrough(self, dns_testset, identity_checkpoint):
        """Test a unit-mask model scores the same as the unprocessed mic."""
        base = evaluate(dns_testset, "passthrough")
        model = evaluate(dns_testset, "model", checkpoint=identity_checkpoint)
        for a, b in zip(base.cases, model.cases):
            assert b.stoi == pytest.approx(a.stoi, abs=1e-6)
            assert b.seg_snr_db == pytest.approx(a.seg_snr_db, abs=1e-4)

    def test_on_case_callback(self, dns_testset):
        """Test the callback sees every case."""
        seen = []
        evaluate(dns_testset, "passthrough", on_case=seen.append)
        assert len(seen) == CASES

    def test_laec_only_needs_farend(self, dns_testset):
        """Test the canceller condition refuses DNS cases."""
        with pytest.raises(InvalidInputError):
            evaluate(dns_testset, "laec_only")

    def test_laec_only_on_echo_cases(self, aec_testset):
        """Test the canceller condition runs on echo cases."""
        report = evaluate(aec_testset, "laec_only", label="LAEC")
        assert report.name == "LAEC"
        assert len(report.cases) == 2
        assert all(math.isfinite(c.si_sdr_db) for c in report.cases)

    def test_unknown_mode(self, dns_testset):
        """Test an unknown condition is rejected."""
        with pytest.raises(InvalidConfigError):
            evaluate(dns_testset, "best")

    def test_model_needs_checkpoint(self, dns_testset):
        """Test model mode without a checkpoint is rejected."""
        with pytest.raises(InvalidConfigError):
            evaluate(dns_testset, "model")

    def test_missing_directory(self, tmp_path):
        """Test a missing test set directory raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            evaluate(tmp_path / "absent")

    @pytest.mark.slow
    def test_oracle_beats_passthrough(self, dns_testset):
        """Test the projected oracle mask improves on the noisy mic."""
        base = evaluate(dns_testset, "passthrough")
        oracle = evaluate(dns_testset, "oracle")
        assert oracle.mean("stoi") > base.mean("stoi")
        assert oracle.mean("si_sdr_db") > base.mean("si_sdr_db")


class TestMetricReport:
    """Tests for MetricReport aggregation."""

    def test_group_means(self):
        """Test low, high and overall means."""
        report = MetricReport("x", [_case("a", "low", 0.2), _case("b", "high", 0.8), _case("c", "high", 0.6)])
        assert report.mean("stoi", "low") == pytest.approx(0.2)
        assert report.mean("stoi", "high") == pytest.approx(0.7)
        assert report.mean("stoi") == pytest.approx((0.2 + 0.8 + 0.6) / 3)
        assert set(report.aggregates()) == {"low", "high", "all"}
        assert set(report.aggregates()["all"]) == set(METRICS)

    def test_empty_group_is_nan(self):
        """Test a group without cases averages to NaN."""
        report = MetricReport("x", [_case("a", "high", 0.5)])
        assert math.isnan(report.mean("stoi", "low"))

    def test_nan_values_skipped(self):
        """Test undefined per-case values do not poison the mean."""
        nan_case = _case("b", "high", 0.5)
        nan_case.seg_snr_db = float("nan")
        report = MetricReport("x", [_case("a", "high", 0.3), nan_case])
        assert report.mean("seg_snr_db") == pytest.approx(0.3)

    def test_unknown_metric(self):
        """Test an unknown metric name raises KeyError."""
        with pytest.raises(KeyError):
            MetricReport("x").mean("pesq")


# ═══════════════════════════════════════════════════════════════════════════════
# Reports
# ═══════════════════════════════════════════════════════════════════════════════


class TestFormatTable:
    """Tests for format_table."""

    def test_columns_and_rows(self):
        """Test the header lists every aggregate column and one row per report."""
        reports = [
            MetricReport("passthrough", [_case("a", "low", 0.5), _case("b", "high", 0.7)]),
            MetricReport("model", [_case("a", "low", 0.6)], label="GRU-256"),
        ]
        lines = format_table(reports).splitlines()
        for header, *_ in TABLE_COLUMNS:
            assert header in lines[0]
        assert len(lines) == 4
        assert lines[2].startswith("passthrough")
        assert lines[3].startswith("GRU-256")
        assert "0.600" in lines[2]

    def test_empty_group_dash(self):
        """Test NaN aggregates render as a dash."""
        table = format_table(MetricReport("x", [_case("a", "high", 0.5)]))
        assert table.splitlines()[2].split()[2] == "-"

    def test_single_report(self):
        """Test a lone report is accepted."""
        assert format_table(MetricReport("x")).splitlines()[2].startswith("x")


class TestExportCsv:
    """Tests for export_csv."""

    def test_header_and_rows(self, tmp_path):
        """Test one row per case under the fixed header, also written to disk."""
        report = MetricReport("oracle", [_case("case_000000", "low", 0.5), _case("case_000001", "high", 0.9)])
        path = tmp_path / "out" / "metrics.csv"
        text = export_csv(report, path)
        lines = text.splitlines()
        assert lines[0] == ",".join(CASE_COLUMNS)
        assert lines[1].startswith("oracle,case_000000,low,-5,0.5")
        assert path.read_text() == text

    def test_delimiter(self):
        """Test a custom delimiter."""
        text = export_csv(MetricReport("x", [_case("a", "high", 0.5)]), delimiter=";")
        assert text.splitlines()[1].split(";")[0] == "x"
        assert np.isclose(float(text.splitlines()[1].split(";")[4]), 0.5)
