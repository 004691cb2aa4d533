"""Report rendering: aligned plain-text table and delimited export."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Optional, Sequence, Union

from gru_enhance.display.style import Role, paint
from gru_enhance.evalmetrics.evaluate import MetricReport

# (header, metric, tag group, number format)
TABLE_COLUMNS = [
    ("STOI Low", "stoi", "low", "{:.3f}"),
    ("STOI High", "stoi", "high", "{:.3f}"),
    ("STOI", "stoi", "all", "{:.3f}"),
    ("ESTOI", "estoi", "all", "{:.3f}"),
    ("SI-SDR", "si_sdr_db", "all", "{:.2f}"),
    ("SegSNR", "seg_snr_db", "all", "{:.2f}"),
]

CASE_COLUMNS = ["condition", "case_id", "tag", "snr_db", "stoi", "estoi", "si_sdr_db", "seg_snr_db"]


def _fmt(value: float, pattern: str) -> str:
    return "-" if math.isnan(value) else pattern.format(value)


def format_table(reports: Union[MetricReport, Sequence[MetricReport]], color: bool = False) -> str:
    """Render one row per report with the aggregate columns.

    Args:
        reports: One report or several conditions to compare.
        color: Style the header as a title when the terminal allows it.
    """
    if isinstance(reports, MetricReport):
        reports = [reports]
    header = ["Condition", "Cases"] + [c[0] for c in TABLE_COLUMNS]
    rows = [
        [r.name, str(len(r.cases))]
        + [_fmt(r.mean(metric, tag), pattern) for _, metric, tag, pattern in TABLE_COLUMNS]
        for r in reports
    ]
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
              for i in range(len(header))]

    def line(cells: list[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [cell.rjust(w) for cell, w in zip(cells[1:], widths[1:])]
        return "  ".join([first, *rest])

    head = line(header)
    if color:
        head = paint(head, Role.TITLE)
    out = [head, "-" * sum(widths) + "-" * 2 * (len(widths) - 1)]
    out.extend(line(row) for row in rows)
    return "\n".join(out)


def export_csv(
    reports: Union[MetricReport, Sequence[MetricReport]],
    path: Optional[Union[str, Path]] = None,
    delimiter: str = ",",
) -> str:
    """Per-case rows for every report as delimited text.

    Args:
        reports: Reports to export.
        path: Also write the text to this file when given.
        delimiter: Field separator.

    Returns:
        The delimited text.
    """
    if isinstance(reports, MetricReport):
        reports = [reports]
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(CASE_COLUMNS)
    for report in reports:
        for case in report.cases:
            row = case.as_dict()
            writer.writerow(
                [report.name] + [row[k] if isinstance(row[k], str) else f"{row[k]:.6g}" for k in CASE_COLUMNS[1:]]
            )
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


__all__ = ["format_table", "export_csv", "TABLE_COLUMNS", "CASE_COLUMNS"]
