"""
Metrics and experiment sweeps.
"""

from .metrics import (
    accuracy_at_threshold,
    aggregate_by_family,
    average_precision,
    build_report,
    evaluate,
    mean_ap,
    score_items,
)
from .sweeps import (
    compare_strategies,
    export_features,
    fewshot_experiment,
    load_eval_sets,
    robustness_sweep,
    size_ablation,
    strategy_specs,
)

__all__ = [
    "accuracy_at_threshold",
    "aggregate_by_family",
    "average_precision",
    "build_report",
    "compare_strategies",
    "evaluate",
    "export_features",
    "fewshot_experiment",
    "load_eval_sets",
    "mean_ap",
    "robustness_sweep",
    "score_items",
    "size_ablation",
    "strategy_specs",
]
