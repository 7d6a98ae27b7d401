"""EM/F1 scoring, reporting, and the post-hoc domain probe."""

from .evaluate import (
    EvalError,
    evaluate,
    pooled_representations,
    predict_dataset,
    score_predictions,
)
from .probe import ProbeError, ProbeResult, domain_probe
from .report import (
    ComparisonRow,
    DatasetScore,
    EvalReport,
    comparison_from_report_dicts,
    render_comparison,
)
from .squad_metrics import exact_match, f1_score, normalize_answer

__all__ = [
    "ComparisonRow",
    "DatasetScore",
    "EvalError",
    "EvalReport",
    "ProbeError",
    "ProbeResult",
    "comparison_from_report_dicts",
    "domain_probe",
    "evaluate",
    "exact_match",
    "f1_score",
    "normalize_answer",
    "pooled_representations",
    "predict_dataset",
    "render_comparison",
    "score_predictions",
]
