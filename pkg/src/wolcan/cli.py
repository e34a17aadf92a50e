"""Command-line entry points for simulation runs and data analyses."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import outcome_reg, pseudo_weights
from .harness import (
    ScenarioConfig,
    ScenarioReport,
    emit_report,
    run_scenario,
    scenario_config,
    scenario_ids,
    summary_frame,
)
from .wolca import WolcanConfig, fit_wolcan


def _load_config(config_path, params: dict) -> dict:
    """Merge a JSON config file over the CLI flag values (file wins)."""
    if not config_path:
        return params
    with open(config_path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise click.ClickException("config file must hold a JSON object")
    for key, value in data.items():
        params[key.replace("-", "_")] = value
    return params


def _parse_settings(text: str):
    """'0.05:0.05,0.01:0.05' -> ((0.05, 0.05), (0.01, 0.05))."""
    out = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) != 2:
            raise click.ClickException(f"bad settings entry {part!r}; want fB:fR")
        out.append((float(pieces[0]), float(pieces[1])))
    return tuple(out)


def _parse_trim(text):
    if text is None:
        return 20.0
    if str(text).lower() in ("none", "off"):
        return None
    return float(text)


def _csv_list(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else []


def _echo_report(report: ScenarioReport, written: dict) -> None:
    click.echo(summary_frame(report).to_string(index=False))
    if report.failures:
        click.echo(f"failed replicate cells: {report.failures}")
    for name, path in written.items():
        click.echo(f"wrote {name}: {path}")


def _run_and_emit(cfg: ScenarioConfig, out_dir, jobs: int, svg: bool) -> None:
    total_cells = cfg.replicates * (len(cfg.settings) if cfg.kind == "weights" else 1)
    progress = (lambda done, total: click.echo(f"replicate {done}/{total}", err=True))
    report = run_scenario(cfg, n_jobs=jobs, progress=progress)
    formats = ("csv", "svg") if svg else ("csv",)
    written = emit_report(report, out_dir, formats)
    _echo_report(report, written)
    if total_cells and report.failures >= total_cells:
        raise click.ClickException("every replicate failed")


@click.group()
def main() -> None:
    """Pseudo-weighted latent class analysis for non-probability samples."""


@main.command("simulate-weights")
@click.option("--scenario", default="1A", show_default=True)
@click.option("--replicates", type=int, default=None)
@click.option("--n-pop", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--settings", default=None, help="fB:fR pairs, comma separated.")
@click.option("--roster", default=None, help="Comma-separated weight model names.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--svg/--no-svg", default=True, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file whose entries override the flags.")
def simulate_weights(scenario, replicates, n_pop, seed, settings, roster,
                     out_dir, jobs, svg, config_path):
    """Run a study-1 scenario: pseudo-weight estimators vs design weights."""
    params = _load_config(config_path, {
        "scenario": scenario, "replicates": replicates, "n_pop": n_pop,
        "seed": seed, "settings": settings, "roster": roster,
        "out_dir": out_dir, "jobs": jobs, "svg": svg,
    })
    overrides = {}
    for key in ("replicates", "n_pop", "seed"):
        if params[key] is not None:
            overrides[key] = int(params[key])
    if params["settings"] is not None:
        raw = params["settings"]
        overrides["settings"] = (
            _parse_settings(raw) if isinstance(raw, str)
            else tuple(tuple(float(v) for v in s) for s in raw)
        )
    if params["roster"] is not None:
        raw = params["roster"]
        overrides["roster"] = tuple(_csv_list(raw) if isinstance(raw, str) else raw)
    try:
        cfg = scenario_config(params["scenario"], **overrides)
    except ValueError as err:
        raise click.ClickException(str(err)) from err
    if cfg.kind != "weights":
        raise click.ClickException(f"{cfg.scenario} is not a weight scenario")
    _run_and_emit(cfg, params["out_dir"], int(params["jobs"]), bool(params["svg"]))


@main.command("simulate-lca")
@click.option("--scenario", default="2A", show_default=True)
@click.option("--replicates", type=int, default=None)
@click.option("--n-pop", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--m-draws", type=int, default=None, help="Pseudo-weight posterior draws.")
@click.option("--d-draws", type=int, default=None, help="Weight draws carried into the fit.")
@click.option("--trim-c", default=None, help="Weight trimming multiplier, or 'none'.")
@click.option("--adjust/--no-adjust", default=None, help="Post-hoc variance adjustment.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--svg/--no-svg", default=True, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file whose entries override the flags.")
def simulate_lca(scenario, replicates, n_pop, seed, m_draws, d_draws, trim_c,
                 adjust, out_dir, jobs, svg, config_path):
    """Run a study-2 scenario: weighted latent class fit vs unweighted."""
    params = _load_config(config_path, {
        "scenario": scenario, "replicates": replicates, "n_pop": n_pop,
        "seed": seed, "m_draws": m_draws, "d_draws": d_draws,
        "trim_c": trim_c, "adjust": adjust, "out_dir": out_dir,
        "jobs": jobs, "svg": svg,
    })
    overrides = {}
    for key in ("replicates", "n_pop", "seed", "m_draws", "d_draws"):
        if params[key] is not None:
            overrides[key] = int(params[key])
    if params["trim_c"] is not None:
        overrides["trim_c"] = _parse_trim(params["trim_c"])
    if params["adjust"] is not None:
        overrides["adjust"] = bool(params["adjust"])
    for key in ("overlap", "fracs", "patterns", "missing_covariates", "k_max",
                "adaptive_iters", "adaptive_burn", "adaptive_thin",
                "fixed_iters", "fixed_burn", "fixed_thin"):
        if key in params:
            value = params[key]
            overrides[key] = tuple(value) if key == "fracs" else value
    try:
        cfg = scenario_config(params["scenario"], **overrides)
    except ValueError as err:
        raise click.ClickException(str(err)) from err
    if cfg.kind != "lca":
        raise click.ClickException(f"{cfg.scenario} is not a latent class scenario")
    _run_and_emit(cfg, params["out_dir"], int(params["jobs"]), bool(params["svg"]))


@main.command("list-scenarios")
def list_scenarios():
    """Print the registered scenario identifiers."""
    for sid in scenario_ids():
        cfg = scenario_config(sid)
        click.echo(f"{sid}: kind={cfg.kind} overlap={cfg.overlap} fracs={cfg.fracs}")


@main.command("estimate-weights")
@click.option("--nps", "nps_path", required=True, type=click.Path(exists=True))
@click.option("--ps", "ps_path", required=True, type=click.Path(exists=True))
@click.option("--aux-cols", required=True, help="Shared covariate columns, comma separated.")
@click.option("--pi-col", default="pi_R", show_default=True,
              help="PS inclusion probability column.")
@click.option("--m-draws", type=int, default=1000, show_default=True)
@click.option("--burn", type=int, default=100, show_default=True)
@click.option("--trim-c", default="20", show_default=True,
              help="Weight trimming multiplier, or 'none'.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-draws", type=click.Path(), default=None,
              help="Write the units x draws weight table here.")
@click.option("--out-means", type=click.Path(), default=None,
              help="Write per-unit mean weights here.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def estimate_weights(nps_path, ps_path, aux_cols, pi_col, m_draws, burn,
                     trim_c, seed, out_draws, out_means, config_path):
    """Estimate pseudo-weights for an NPS against a reference PS."""
    params = _load_config(config_path, {
        "nps_path": nps_path, "ps_path": ps_path, "aux_cols": aux_cols,
        "pi_col": pi_col, "m_draws": m_draws, "burn": burn, "trim_c": trim_c,
        "seed": seed, "out_draws": out_draws, "out_means": out_means,
    })
    if not params["out_draws"] and not params["out_means"]:
        raise click.ClickException("give --out-draws and/or --out-means")
    cols = _csv_list(params["aux_cols"]) if isinstance(params["aux_cols"], str) else list(params["aux_cols"])
    try:
        nps = pseudo_weights.load_nps_csv(params["nps_path"], cols)
        ps = pseudo_weights.load_ps_csv(params["ps_path"], cols, params["pi_col"])
        cfg = pseudo_weights.PseudoWeightConfig(
            n_draws=int(params["m_draws"]),
            trim_c=_parse_trim(params["trim_c"]),
            burn=int(params["burn"]),
        )
        draws = pseudo_weights.estimate_pseudo_weights(nps, ps, cfg, int(params["seed"]))
    except ValueError as err:
        raise click.ClickException(str(err)) from err
    if params["out_draws"]:
        pseudo_weights.weight_draws_frame(draws).to_csv(params["out_draws"], index=False)
        click.echo(f"wrote draws: {params['out_draws']}")
    if params["out_means"]:
        pseudo_weights.weight_means_frame(draws).to_csv(params["out_means"], index=False)
        click.echo(f"wrote means: {params['out_means']}")
    click.echo(f"units: {draws.n_units}  draws: {draws.n_draws}")


def _read_weight_columns(path) -> np.ndarray:
    """A weights file: either draw_* columns or a single weight column."""
    frame = pd.read_csv(path)
    draw_cols = [c for c in frame.columns if c.startswith("draw_")]
    if draw_cols:
        return frame[draw_cols].to_numpy(dtype=float)
    if "weight" in frame.columns:
        return frame[["weight"]].to_numpy(dtype=float)
    if frame.shape[1] == 1:
        return frame.to_numpy(dtype=float)
    raise click.ClickException(
        f"{path}: expected draw_* columns or a single 'weight' column"
    )


@main.command("fit-wolcan")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True),
              help="CSV of integer-coded responses, one row per unit.")
@click.option("--item-cols", default=None, help="Item columns; default all columns.")
@click.option("--weights", "weights_path", default=None, type=click.Path(exists=True),
              help="Weight draws or means CSV; omit for an unweighted fit.")
@click.option("--d-draws", type=int, default=10, show_default=True,
              help="Weight draws carried into the fit (when draws are given).")
@click.option("--k-max", type=int, default=30, show_default=True)
@click.option("--k-hat", type=int, default=None, help="Skip the adaptive phase.")
@click.option("--adaptive-iters", type=int, default=10_000, show_default=True)
@click.option("--adaptive-burn", type=int, default=5_000, show_default=True)
@click.option("--fixed-iters", type=int, default=20_000, show_default=True)
@click.option("--fixed-burn", type=int, default=10_000, show_default=True)
@click.option("--adjust/--no-adjust", default=True, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def fit_wolcan_cmd(items_path, item_cols, weights_path, d_draws, k_max, k_hat,
                   adaptive_iters, adaptive_burn, fixed_iters, fixed_burn,
                   adjust, seed, out_dir, config_path):
    """Fit the weighted latent class model and write estimate tables."""
    params = _load_config(config_path, {
        "items_path": items_path, "item_cols": item_cols,
        "weights_path": weights_path, "d_draws": d_draws, "k_max": k_max,
        "k_hat": k_hat, "adaptive_iters": adaptive_iters,
        "adaptive_burn": adaptive_burn, "fixed_iters": fixed_iters,
        "fixed_burn": fixed_burn, "adjust": adjust, "seed": seed,
        "out_dir": out_dir,
    })
    frame = pd.read_csv(params["items_path"])
    cols = params["item_cols"]
    if cols:
        cols = _csv_list(cols) if isinstance(cols, str) else list(cols)
        missing = [c for c in cols if c not in frame.columns]
        if missing:
            raise click.ClickException(f"items file missing columns: {missing}")
        frame = frame[cols]
    x = frame.to_numpy(dtype=np.int64)

    if params["weights_path"]:
        matrix = _read_weight_columns(params["weights_path"])
        if matrix.shape[0] != x.shape[0]:
            raise click.ClickException(
                f"weights rows ({matrix.shape[0]}) != item rows ({x.shape[0]})"
            )
        if matrix.shape[1] > 1:
            wd = pseudo_weights.WeightDraws(
                draws=matrix, means=matrix.mean(axis=1), trim_c=None,
                bounds=np.full(matrix.shape[1], np.inf),
            )
            selected = pseudo_weights.select_weight_draws(
                wd, min(int(params["d_draws"]), matrix.shape[1])
            )
            mean_weights = wd.means
        else:
            selected = [matrix[:, 0]]
            mean_weights = matrix[:, 0]
    else:
        selected = [np.ones(x.shape[0])]
        mean_weights = selected[0]

    cfg = WolcanConfig(
        k_max=int(params["k_max"]),
        adaptive_iters=int(params["adaptive_iters"]),
        adaptive_burn=int(params["adaptive_burn"]),
        fixed_iters=int(params["fixed_iters"]),
        fixed_burn=int(params["fixed_burn"]),
        adjust=bool(params["adjust"]),
        k_hat=None if params["k_hat"] is None else int(params["k_hat"]),
    )
    try:
        fit = fit_wolcan(x, selected, cfg, seed=int(params["seed"]),
                         mean_weights=mean_weights)
    except ValueError as err:
        raise click.ClickException(str(err)) from err

    out = Path(params["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    est = fit.estimates
    k_range = np.arange(1, fit.k_hat + 1)
    pd.DataFrame({
        "class": k_range, "estimate": est.pi_median,
        "lower": est.pi_lower, "upper": est.pi_upper,
    }).to_csv(out / "pi.csv", index=False)

    j_dim, _, r_dim = est.theta_median.shape
    items_idx, classes_idx, levels_idx = np.meshgrid(
        np.arange(1, j_dim + 1), k_range, np.arange(1, r_dim + 1), indexing="ij"
    )
    active = levels_idx <= est.n_levels[items_idx - 1]
    pd.DataFrame({
        "item": items_idx[active], "class": classes_idx[active],
        "level": levels_idx[active],
        "estimate": est.theta_median[active],
        "lower": est.theta_lower[active], "upper": est.theta_upper[active],
    }).to_csv(out / "theta.csv", index=False)

    assign = pd.DataFrame({"unit": np.arange(1, x.shape[0] + 1), "class": fit.assignments})
    for k in k_range:
        assign[f"prob_class_{k}"] = fit.membership[:, k - 1]
    assign.to_csv(out / "assignments.csv", index=False)

    meta = {
        "k_hat": int(fit.k_hat), "converged": bool(fit.converged),
        "n_units": int(x.shape[0]), "n_weight_draws": len(selected),
        "retention": [float(r) for r in fit.retention],
    }
    (out / "fit.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    click.echo(f"k_hat: {fit.k_hat}  converged: {fit.converged}")
    click.echo(f"wrote pi.csv, theta.csv, assignments.csv, fit.json to {out}")


@main.command("fit-outcome")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="CSV with the outcome and any confounders.")
@click.option("--outcome-col", required=True)
@click.option("--confounders", default=None, help="Confounder columns, comma separated.")
@click.option("--assignments", "assign_path", default=None, type=click.Path(exists=True),
              help="assignments.csv from fit-wolcan; default --class-col in the data file.")
@click.option("--class-col", default=None, help="Class label column inside --data.")
@click.option("--n-classes", type=int, default=None)
@click.option("--weights", "weights_path", default=None, type=click.Path(exists=True),
              help="Weight draws or means CSV; omit for unit weights.")
@click.option("--d-draws", type=int, default=10, show_default=True)
@click.option("--prior-scale", type=float, default=5.0, show_default=True)
@click.option("--iters", type=int, default=20_000, show_default=True)
@click.option("--burn", type=int, default=10_000, show_default=True)
@click.option("--adjust/--no-adjust", default=True, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def fit_outcome(data_path, outcome_col, confounders, assign_path, class_col,
                n_classes, weights_path, d_draws, prior_scale, iters, burn,
                adjust, seed, out_path, config_path):
    """Weighted logistic regression of an outcome on latent class labels."""
    params = _load_config(config_path, {
        "data_path": data_path, "outcome_col": outcome_col,
        "confounders": confounders, "assign_path": assign_path,
        "class_col": class_col, "n_classes": n_classes,
        "weights_path": weights_path, "d_draws": d_draws,
        "prior_scale": prior_scale, "iters": iters, "burn": burn,
        "adjust": adjust, "seed": seed, "out_path": out_path,
    })
    conf_cols = params["confounders"]
    conf_cols = (_csv_list(conf_cols) if isinstance(conf_cols, str) else conf_cols) or None
    try:
        y, conf = outcome_reg.load_outcome_csv(
            params["data_path"], params["outcome_col"], conf_cols
        )
    except ValueError as err:
        raise click.ClickException(str(err)) from err

    if params["assign_path"]:
        aframe = pd.read_csv(params["assign_path"])
        if "class" not in aframe.columns:
            raise click.ClickException("assignments file needs a 'class' column")
        labels = aframe["class"].to_numpy(dtype=np.int64)
    elif params["class_col"]:
        dframe = pd.read_csv(params["data_path"])
        if params["class_col"] not in dframe.columns:
            raise click.ClickException(f"no column {params['class_col']!r} in data file")
        labels = dframe[params["class_col"]].to_numpy(dtype=np.int64)
    else:
        raise click.ClickException("give --assignments or --class-col")
    if labels.shape[0] != y.shape[0]:
        raise click.ClickException("class labels do not align with the outcome rows")

    k = int(params["n_classes"]) if params["n_classes"] else int(labels.max())
    if params["weights_path"]:
        matrix = _read_weight_columns(params["weights_path"])
        if matrix.shape[0] != y.shape[0]:
            raise click.ClickException("weights rows do not align with the outcome rows")
        if matrix.shape[1] > 1:
            wd = pseudo_weights.WeightDraws(
                draws=matrix, means=matrix.mean(axis=1), trim_c=None,
                bounds=np.full(matrix.shape[1], np.inf),
            )
            weight_draws = pseudo_weights.select_weight_draws(
                wd, min(int(params["d_draws"]), matrix.shape[1])
            )
        else:
            weight_draws = [matrix[:, 0]]
    else:
        weight_draws = [np.ones(y.shape[0])]

    try:
        design = outcome_reg.build_design(y, labels, k, conf, conf_cols)
        posterior = outcome_reg.fit_outcome_across_draws(
            design, weight_draws,
            prior_scale=float(params["prior_scale"]),
            iters=int(params["iters"]), burn=int(params["burn"]),
            seed=int(params["seed"]), adjust=bool(params["adjust"]),
        )
    except ValueError as err:
        raise click.ClickException(str(err)) from err
    table = outcome_reg.or_table_frame(posterior)
    table.to_csv(params["out_path"], index=False)
    click.echo(table.to_string(index=False))
    click.echo(f"wrote {params['out_path']}")


@main.command("report")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True),
              help="Replicate-level CSV produced by a simulate command.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--svg/--no-svg", default=True, show_default=True)
def report_cmd(records_path, out_dir, svg):
    """Rebuild summary table and figure from a replicate-level CSV."""
    records = pd.read_csv(records_path, float_precision="round_trip")
    if "error" in records.columns:
        records["error"] = records["error"].fillna("")
    kind = "lca" if "k_hat" in records.columns else "weights"
    sid = str(records["scenario"].iloc[0]) if len(records) else "NA"
    try:
        cfg = scenario_config(sid)
    except ValueError:
        cfg = ScenarioConfig(scenario=sid, kind=kind)
    if len(records):
        cfg = replace(cfg, replicates=int(records["replicate"].max()))
    failed = records["failed"].astype(bool) if len(records) else pd.Series(dtype=bool)
    failures = (
        int(records.loc[failed].drop_duplicates(["replicate", "setting"]).shape[0])
        if len(records) else 0
    )
    rep = ScenarioReport(
        scenario=sid, kind=kind, config=cfg, records=records,
        failures=failures, elapsed=0.0,
    )
    written = emit_report(rep, out_dir, ("csv", "svg") if svg else ("csv",))
    _echo_report(rep, written)


if __name__ == "__main__":
    main()
