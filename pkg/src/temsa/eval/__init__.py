"""Evaluation: confusion matrices, classification metrics, the Wilcoxon
signed-rank test, and comparison reports with plots."""

from .metrics import ConfusionMatrix, MetricSet, confusion, metrics
from .wilcoxon import WilcoxonResult, signed_rank_null_counts, wilcoxon_signed_rank
from .report import (
    BASELINES,
    ComparisonReport,
    compare_experiments,
    emit_plots,
    write_metrics_csv,
    write_report_json,
)

__all__ = [
    "ConfusionMatrix",
    "MetricSet",
    "confusion",
    "metrics",
    "WilcoxonResult",
    "signed_rank_null_counts",
    "wilcoxon_signed_rank",
    "BASELINES",
    "ComparisonReport",
    "compare_experiments",
    "emit_plots",
    "write_metrics_csv",
    "write_report_json",
]
