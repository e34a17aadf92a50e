"""Simulation harness: scenario registry, runner, metrics, reporting."""
from .metrics import (
    lca_replicate_metrics,
    match_classes,
    metric_coverage,
    population_truth,
    weight_abs_bias,
)
from .report import LCA_SUMMARY_COLUMNS, emit_report, replicate_figure, summary_frame
from .runner import (
    LCA_METRIC_COLUMNS,
    ScenarioReport,
    WEIGHT_METRIC_COLUMNS,
    record_columns,
    run_replicate,
    run_scenario,
)
from .scenarios import (
    LCA_MODELS,
    SIZE_SETTINGS,
    WEIGHT_MODEL_ROSTER,
    ScenarioConfig,
    estimate_model_weights,
    run_lca_replicate,
    run_weight_replicate,
    scenario_config,
    scenario_ids,
)

__all__ = [
    "LCA_METRIC_COLUMNS",
    "LCA_MODELS",
    "LCA_SUMMARY_COLUMNS",
    "SIZE_SETTINGS",
    "ScenarioConfig",
    "ScenarioReport",
    "WEIGHT_METRIC_COLUMNS",
    "WEIGHT_MODEL_ROSTER",
    "emit_report",
    "estimate_model_weights",
    "lca_replicate_metrics",
    "match_classes",
    "metric_coverage",
    "population_truth",
    "record_columns",
    "replicate_figure",
    "run_lca_replicate",
    "run_replicate",
    "run_scenario",
    "run_weight_replicate",
    "scenario_config",
    "scenario_ids",
    "summary_frame",
    "weight_abs_bias",
]
