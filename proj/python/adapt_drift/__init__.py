"""Drift-aware pseudo-labeling for malware classifiers.

Thin wrapper over the C++ core. Features are float arrays of shape
(rows, dims); labels are integer arrays with class 0 benign.
"""

from ._core import (
    AdaptError,
    absolute_exposure,
    cmd_drift,
    cmd_report,
    cmd_run,
    cmd_search,
    cmd_synth,
    expected_calibration_error,
    generate_rotating,
    otdd,
    period_metrics,
    rank_auc,
    run_adapt,
    select_pseudo_labels,
    update_thresholds,
    wilcoxon,
)

__all__ = [
    "AdaptError",
    "absolute_exposure",
    "cmd_drift",
    "cmd_report",
    "cmd_run",
    "cmd_search",
    "cmd_synth",
    "expected_calibration_error",
    "generate_rotating",
    "otdd",
    "period_metrics",
    "rank_auc",
    "run_adapt",
    "select_pseudo_labels",
    "update_thresholds",
    "wilcoxon",
]
