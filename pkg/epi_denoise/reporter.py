"""Aggregate experiment rows and write them as CSV or JSON lines.

The detail file holds one row per replicate, grid point and method. The
aggregate file, written next to it as `<stem>_aggregate<suffix>`, holds the
count, mean, median and quartiles of every metric per grid point and method.
"""

import csv
import json
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .model_objects import Report

logger = logging.getLogger(__name__)

AGGREGATE_STATS = ["count", "mean", "median", "q25", "q75"]


class Reporter:
    """Builds aggregate statistics and console summaries for a Report."""

    def __init__(self, report: Report) -> None:
        """Initialize Reporter class and compute the aggregates."""
        self.report = report
        self.report.aggregates = self.aggregate()

    @property
    def aggregate_columns(self) -> List[str]:
        """Column order of the aggregate file."""
        keys = ["scenario"] + self.report.group_keys + ["method", "metric"]
        return keys + AGGREGATE_STATS

    def _groups(self) -> Dict[Tuple, List[Dict[str, Any]]]:
        """Rows grouped by grid point and method, in order of first appearance."""
        groups: Dict[Tuple, List[Dict[str, Any]]] = {}
        for row in self.report.rows:
            key = tuple(row.get(column) for column in self.report.group_keys) + (
                row.get("method"),
            )
            groups.setdefault(key, []).append(row)
        return groups

    def aggregate(self) -> List[Dict[str, Any]]:
        """Summary statistics per grid point, method and metric.

        Missing values (None) are left out of the statistics.

        Returns
        -------
            List[Dict[str, Any]]: Aggregate rows keyed by aggregate_columns.
        """
        aggregates = []
        for key, rows in self._groups().items():
            for metric in self.report.metrics:
                values = np.array(
                    [row[metric] for row in rows if row.get(metric) is not None],
                    dtype=float,
                )
                entry: Dict[str, Any] = {"scenario": self.report.scenario}
                entry.update(zip(self.report.group_keys, key[:-1]))
                entry.update({"method": key[-1], "metric": metric})
                entry["count"] = int(values.size)
                if values.size:
                    entry["mean"] = float(values.mean())
                    entry["median"] = float(np.median(values))
                    entry["q25"] = float(np.percentile(values, 25))
                    entry["q75"] = float(np.percentile(values, 75))
                else:
                    entry.update(mean=None, median=None, q25=None, q75=None)
                aggregates.append(entry)
        return aggregates

    def create_report(self) -> List[str]:
        """Console lines: one per aggregate row, medians with interquartile range.

        Returns
        -------
            List[str]: Lines of the summary.
        """
        report = [
            "==========> Epidemic Denoising Report <==========",
            f"scenario: {self.report.scenario}",
            f"rows: {len(self.report.rows)}",
        ]
        if self.report.nonconverged:
            report.append(f"non-converged solves: {self.report.nonconverged}")
        for entry in self.report.aggregates:
            grid = ", ".join(f"{key}={entry[key]}" for key in self.report.group_keys)
            if entry["count"] == 0:
                label = f"{entry['method']} {entry['metric']}"
                report.append(f"{grid} | {label}: no values")
                continue
            report.append(
                f"{grid} | {entry['method']} {entry['metric']}: "
                f"median {entry['median']:.4g} "
                f"[{entry['q25']:.4g}, {entry['q75']:.4g}], "
                f"mean {entry['mean']:.4g} (n={entry['count']})"
            )
        return report

    def print_report(self) -> None:
        """Print the summary to stdout."""
        for line in self.create_report():
            print(line)


def companion_path(path: str, tag: str, suffix: Optional[str] = None) -> str:
    """<stem>_<tag><suffix> next to path, keeping its suffix unless one is given."""
    stem, own_suffix = os.path.splitext(path)
    return f"{stem}_{tag}{own_suffix if suffix is None else suffix}"


def aggregate_path(path: str) -> str:
    """Path of the aggregate file that accompanies a detail file."""
    return companion_path(path, "aggregate")


def _write_rows(
    path: str, columns: List[str], rows: List[Dict[str, Any]], fmt: str
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as report_file:
        if fmt == "csv":
            writer = csv.DictWriter(
                report_file, fieldnames=columns, lineterminator="\n"
            )
            writer.writeheader()
            for row in rows:
                writer.writerow({column: row.get(column) for column in columns})
        elif fmt == "jsonl":
            for row in rows:
                record = {column: row.get(column) for column in columns}
                report_file.write(json.dumps(record) + "\n")
        else:
            raise ValueError(f"Unknown report format '{fmt}', expected csv or jsonl")


def emit_report(report: Report, path: str, fmt: str = "csv") -> List[str]:
    """Write the detail file and, when the report has metrics, the aggregate file.

    Args:
    ----
        report (Report): Report to write; aggregates are computed if missing.
        path (str): Detail file path.
        fmt (str): 'csv' or 'jsonl'.

    Returns:
    -------
        List[str]: Paths written.
    """
    _write_rows(path, report.columns, report.rows, fmt)
    written = [path]
    if report.metrics:
        reporter = Reporter(report)
        aggregate_file = aggregate_path(path)
        _write_rows(aggregate_file, reporter.aggregate_columns, report.aggregates, fmt)
        written.append(aggregate_file)
    for written_path in written:
        logger.info("Report written to %s", written_path)
    return written


def _parse_cell(value: str) -> Any:
    if value == "":
        return None
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def read_report(path: str, fmt: str = "csv") -> List[Dict[str, Any]]:
    """Read rows written by emit_report; empty CSV cells become None."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"The report file {path} does not exist")
    with open(path, newline="", encoding="utf-8") as report_file:
        if fmt == "csv":
            return [
                {key: _parse_cell(value) for key, value in row.items()}
                for row in csv.DictReader(report_file)
            ]
        if fmt == "jsonl":
            return [json.loads(line) for line in report_file if line.strip()]
    raise ValueError(f"Unknown report format '{fmt}', expected csv or jsonl")
