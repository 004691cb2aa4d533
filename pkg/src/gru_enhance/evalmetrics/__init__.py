"""Objective metrics and test-set evaluation.

Modules:
    metrics: STOI, ESTOI, SI-SDR and segmental SNR
    evaluate: Score a persisted test set under one processing condition
    report: Aligned text table and delimited export
"""

from gru_enhance.evalmetrics.evaluate import METRICS, MODES, CaseMetrics, MetricReport, evaluate
from gru_enhance.evalmetrics.metrics import estoi, seg_snr, si_sdr, stoi
from gru_enhance.evalmetrics.report import export_csv, format_table

__all__ = [
    # Metrics
    "stoi",
    "estoi",
    "si_sdr",
    "seg_snr",
    # Evaluation
    "MODES",
    "METRICS",
    "CaseMetrics",
    "MetricReport",
    "evaluate",
    # Reports
    "format_table",
    "export_csv",
]
