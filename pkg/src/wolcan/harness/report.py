"""Aggregation and report emission (CSV tables, strip plots)."""
from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .runner import LCA_METRIC_COLUMNS, ScenarioReport  # noqa: E402

LCA_SUMMARY_COLUMNS = [
    "Scenario",
    "Model",
    "Wts Abs Bias",
    "K Abs Bias",
    "π Abs Bias",
    "θ Abs Bias",
    "π CI Width",
    "θ CI Width",
    "π Cov",
    "θ Cov",
]

_LCA_SOURCE = dict(zip(LCA_SUMMARY_COLUMNS[2:], LCA_METRIC_COLUMNS))

_PLOT_METRICS = [
    ("pi_abs_bias", "π abs bias"),
    ("theta_abs_bias", "θ abs bias"),
    ("pi_ci_width", "π CI width"),
    ("theta_ci_width", "θ CI width"),
    ("pi_coverage", "π coverage"),
    ("theta_coverage", "θ coverage"),
]


def _group_mean(records: pd.DataFrame, mask, column: str) -> float:
    """Plain arithmetic mean of the selected replicate values."""
    vals = records.loc[mask, column].to_numpy(dtype=float)
    vals = vals[~np.isnan(vals)]
    return float(np.mean(vals)) if vals.size else float("nan")


def summary_frame(report: ScenarioReport) -> pd.DataFrame:
    """Aggregate table in the published layout.

    Study 2 gives one row per model with the metric columns; study 1 gives
    one row per sampling-fraction setting with one bias column per model.
    Aggregates are arithmetic means over the successful replicate rows.
    """
    rec = report.records
    ok = ~rec["failed"].astype(bool) if len(rec) else pd.Series(dtype=bool)
    if report.kind == "lca":
        rows = []
        for model in report.models:
            mask = ok & (rec["model"] == model)
            row = {"Scenario": report.scenario, "Model": model}
            for out_col, src in _LCA_SOURCE.items():
                row[out_col] = _group_mean(rec, mask, src)
            rows.append(row)
        return pd.DataFrame(rows, columns=LCA_SUMMARY_COLUMNS)

    columns = ["Sample Size", "Overlap"] + list(report.models)
    if not report.models:
        return pd.DataFrame(columns=columns)
    rows = []
    for label in _setting_labels(rec, report):
        row = {"Sample Size": label, "Overlap": report.config.overlap}
        for model in report.models:
            mask = ok & (rec["model"] == model) & (rec["setting"] == label)
            row[model] = _group_mean(rec, mask, "wts_abs_bias")
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def _setting_labels(rec: pd.DataFrame, report: ScenarioReport) -> list[str]:
    if len(rec):
        return list(dict.fromkeys(rec["setting"]))
    return [f"{100 * s[0]:g}%/{100 * s[1]:g}%" for s in report.config.settings]


def _strip(ax, records: pd.DataFrame, models, column: str) -> None:
    """Deterministic swarm: per model, points fan out by value rank."""
    for i, model in enumerate(models):
        mask = (records["model"] == model) & (~records["failed"].astype(bool))
        vals = records.loc[mask, column].to_numpy(dtype=float)
        vals = np.sort(vals[~np.isnan(vals)])
        if vals.size == 0:
            continue
        offs = (np.arange(vals.size) - (vals.size - 1) / 2) * min(0.5 / max(vals.size, 1), 0.06)
        ax.plot(i + offs, vals, linestyle="none", marker="o", markersize=4, alpha=0.75)
    ax.set_xticks(range(len(models)))
    ax.set_xticklabels(models, rotation=30, ha="right", fontsize=8)
    ax.tick_params(labelsize=8)


def replicate_figure(report: ScenarioReport):
    """Strip plots of the replicate metric distributions."""
    rec = report.records
    models = list(report.models)
    if report.kind == "lca":
        fig, axes = plt.subplots(2, 3, figsize=(10, 6), constrained_layout=True)
        for ax, (col, label) in zip(axes.ravel(), _PLOT_METRICS):
            _strip(ax, rec, models, col)
            ax.set_title(label, fontsize=10)
    else:
        labels = _setting_labels(rec, report)
        n = max(len(labels), 1)
        ncol = 2 if n > 1 else 1
        nrow = (n + ncol - 1) // ncol
        fig, axes = plt.subplots(
            nrow, ncol, figsize=(5 * ncol, 3.2 * nrow),
            constrained_layout=True, squeeze=False,
        )
        flat = axes.ravel()
        for ax, label in zip(flat, labels):
            _strip(ax, rec[rec["setting"] == label], models, "wts_abs_bias")
            ax.set_title(f"sizes {label}", fontsize=10)
            ax.set_ylabel("weight abs bias", fontsize=8)
        for ax in flat[len(labels):]:
            ax.set_visible(False)
    fig.suptitle(f"Scenario {report.scenario} ({report.config.replicates} replicates)")
    return fig


def emit_report(report: ScenarioReport, out_dir, formats=("csv", "svg")) -> dict:
    """Write the replicate table, summary table, and figure.

    Output bytes depend only on the report contents: figures use a fixed
    hash salt and carry no timestamps, so a rerun with the same seed
    reproduces every file exactly. Returns {name: path} for what was
    written. An unwritable directory raises.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    if "csv" in formats:
        rep_path = out / f"{report.scenario}_replicates.csv"
        report.records.to_csv(rep_path, index=False)
        written["replicates"] = rep_path
        sum_path = out / f"{report.scenario}_summary.csv"
        summary_frame(report).to_csv(sum_path, index=False)
        written["summary"] = sum_path
    if "svg" in formats:
        with matplotlib.rc_context({"svg.hashsalt": "wolcan"}):
            fig = replicate_figure(report)
            fig_path = out / f"{report.scenario}_beeswarm.svg"
            fig.savefig(fig_path, format="svg", metadata={"Date": None})
            plt.close(fig)
        written["figure"] = fig_path
    return written
