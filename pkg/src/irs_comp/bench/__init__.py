"""Experiment harness: figure presets, seeded sweeps and CSV output."""

from .experiment import (
    HEADER,
    ExperimentSpec,
    ResultRow,
    collect_rows,
    format_summary,
    read_rows,
    rows_to_csv,
    run_experiment,
    summarize,
)
from .figures import FIGURES, figure_spec
from .schemes import (
    SCHEMES,
    Outcome,
    baseline_no_irs,
    baseline_random_phase,
    optimized_continuous,
    quantized,
    run_scheme,
    without_irs,
)

__all__ = [
    "HEADER", "ExperimentSpec", "ResultRow", "collect_rows", "format_summary", "read_rows",
    "rows_to_csv", "run_experiment", "summarize", "FIGURES", "figure_spec", "SCHEMES", "Outcome",
    "baseline_no_irs", "baseline_random_phase", "optimized_continuous", "quantized", "run_scheme",
    "without_irs",
]
