"""Replicate scheduling, seeding, and failure capture for scenario runs."""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .scenarios import (
    LCA_MODELS,
    ScenarioConfig,
    run_lca_replicate,
    run_weight_replicate,
)

WEIGHT_METRIC_COLUMNS = ["wts_abs_bias"]
LCA_METRIC_COLUMNS = [
    "wts_abs_bias",
    "k_abs_bias",
    "pi_abs_bias",
    "theta_abs_bias",
    "pi_ci_width",
    "theta_ci_width",
    "pi_coverage",
    "theta_coverage",
]

_COMMON_COLUMNS = ["scenario", "replicate", "model", "setting", "overlap", "failed", "error"]


def record_columns(kind: str) -> list[str]:
    """Column order of the replicate-level table for a scenario kind."""
    extra = ["n_b", "n_r"]
    if kind == "lca":
        return _COMMON_COLUMNS + extra + ["k_hat", "converged"] + LCA_METRIC_COLUMNS
    return _COMMON_COLUMNS + extra + WEIGHT_METRIC_COLUMNS


@dataclass
class ScenarioReport:
    """A finished scenario: replicate-level records plus bookkeeping.

    ``records`` holds one row per (replicate, setting, model), including
    rows for failed replicates (metrics NaN, ``failed`` True), so the row
    count is always replicates x settings x models.
    """

    scenario: str
    kind: str
    config: ScenarioConfig
    records: pd.DataFrame
    failures: int
    elapsed: float

    @property
    def models(self) -> tuple:
        if len(self.records):
            return tuple(dict.fromkeys(self.records["model"]))
        if self.kind == "lca":
            return LCA_MODELS
        return self.config.roster


def _cells(cfg: ScenarioConfig) -> list[tuple]:
    """(setting, label) pairs; study 2 runs a single setting."""
    if cfg.kind == "weights":
        return [(s, f"{100 * s[0]:g}%/{100 * s[1]:g}%") for s in cfg.settings]
    return [(cfg.fracs, f"{100 * cfg.fracs[0]:g}%/{100 * cfg.fracs[1]:g}%")]


def _failure_rows(cfg: ScenarioConfig, label: str, err: Exception) -> list[dict]:
    models = LCA_MODELS if cfg.kind == "lca" else cfg.roster
    return [
        {"model": m, "setting": label, "overlap": cfg.overlap, "failed": True,
         "error": f"{type(err).__name__}: {err}"}
        for m in models
    ]


def run_replicate(cfg: ScenarioConfig, seed) -> tuple[list[dict], int]:
    """All cells of one replicate; failures are captured per cell.

    Returns the metric rows and the number of failed cells. Worker
    warnings (skipped variance adjustments, sparse chains) are demoted so
    a long run is not drowned out.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cells = _cells(cfg)
    children = ss.spawn(len(cells))
    rows: list[dict] = []
    failures = 0
    for (setting, label), child in zip(cells, children):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if cfg.kind == "weights":
                    got = run_weight_replicate(cfg, setting, child)
                else:
                    got = run_lca_replicate(cfg, child)
            for row in got:
                row.setdefault("failed", False)
                row.setdefault("error", "")
            rows.extend(got)
        except Exception as err:  # noqa: BLE001 - a replicate must not kill the run
            failures += 1
            rows.extend(_failure_rows(cfg, label, err))
    return rows, failures


def _worker(args):
    cfg, rep, child = args
    rows, failures = run_replicate(cfg, child)
    return rep, rows, failures


def run_scenario(cfg: ScenarioConfig, n_jobs: int = 1, progress=None) -> ScenarioReport:
    """Run every replicate of a scenario and assemble the record table.

    Each replicate receives an independent child of ``SeedSequence(seed)``
    (spawned in replicate order), so results are reproducible bit for bit
    for any ``n_jobs``; workers only vary the wall clock. ``progress`` is
    called with (done, total) as replicates finish.
    """
    start = time.perf_counter()
    master = np.random.SeedSequence(cfg.seed)
    children = master.spawn(cfg.replicates)
    jobs = [(cfg, rep, child) for rep, child in enumerate(children)]

    per_rep: list[list[dict]] = [None] * cfg.replicates
    failures = 0
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for done, (rep, rows, fails) in enumerate(pool.map(_worker, jobs), 1):
                per_rep[rep] = rows
                failures += fails
                if progress:
                    progress(done, cfg.replicates)
    else:
        for done, job in enumerate(jobs, 1):
            rep, rows, fails = _worker(job)
            per_rep[rep] = rows
            failures += fails
            if progress:
                progress(done, cfg.replicates)

    columns = record_columns(cfg.kind)
    flat = []
    for rep, rows in enumerate(per_rep):
        for row in rows:
            full = {c: row.get(c, np.nan) for c in columns}
            full["scenario"] = cfg.scenario
            full["replicate"] = rep + 1
            flat.append(full)
    records = pd.DataFrame(flat, columns=columns)
    return ScenarioReport(
        scenario=cfg.scenario,
        kind=cfg.kind,
        config=cfg,
        records=records,
        failures=failures,
        elapsed=time.perf_counter() - start,
    )
