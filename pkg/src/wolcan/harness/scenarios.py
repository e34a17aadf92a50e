"""Scenario registry and single-replicate pipelines for the two studies.

Study 1 compares pseudo-weight estimators against the design weights on a
grid of sampling-fraction settings. Study 2 runs the full weighted latent
class pipeline against an unweighted comparator under design variations
(overlap, sample size, pattern separation, dropped covariates, no variance
adjustment).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, logit

from .. import simgen
from ..outcome_reg import _newton_mode
from ..pseudo_weights import (
    NonProbabilitySampleData,
    ProbabilitySampleData,
    PseudoWeightConfig,
    build_weight_draws,
    estimate_pseudo_weights,
    select_weight_draws,
)
from ..wolca import WolcanConfig, fit_wolcan
from .metrics import lca_replicate_metrics, population_truth, weight_abs_bias

SIZE_SETTINGS = ((0.05, 0.05), (0.05, 0.01), (0.01, 0.05), (0.01, 0.01))

WEIGHT_MODEL_ROSTER = (
    "NoModel",
    "LogReg",
    "LogRegMiss",
    "BART500",
    "BART1000",
    "BART2000",
    "BART1000Miss",
)

# name -> (kind, posterior draws or None, drop a3 and the product term?)
_WEIGHT_MODELS = {
    "NoModel": ("none", None, False),
    "LogReg": ("logreg", None, False),
    "LogRegMiss": ("logreg", None, True),
    "BART500": ("bart", 500, False),
    "BART1000": ("bart", 1000, False),
    "BART2000": ("bart", 2000, False),
    "BART1000Miss": ("bart", 1000, True),
}

LCA_MODELS = ("WOLCAN", "Unweighted")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation scenario.

    Defaults are desk scale: a 10,000-unit population, 10 replicates,
    500 pseudo-weight posterior draws, 10 selected weight draws. Scale up
    ``n_pop``, ``replicates``, ``m_draws``, and ``d_draws`` to reproduce
    full-size runs.
    """

    scenario: str
    kind: str                       # "weights" or "lca"
    overlap: str = "high"
    n_pop: int = 10_000
    replicates: int = 10
    seed: int = 20260822
    # study 1 knobs
    settings: tuple = SIZE_SETTINGS
    roster: tuple = WEIGHT_MODEL_ROSTER
    # study 2 knobs
    fracs: tuple = (0.05, 0.05)
    patterns: str = "disjoint"      # "disjoint" or "non_disjoint"
    missing_covariates: bool = False
    adjust: bool = True
    m_draws: int = 500
    d_draws: int = 10
    trim_c: float | None = 20.0
    k_max: int = 30
    adaptive_iters: int = 10_000
    adaptive_burn: int = 5_000
    adaptive_thin: int = 5
    fixed_iters: int = 20_000
    fixed_burn: int = 10_000
    fixed_thin: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ("weights", "lca"):
            raise ValueError("kind must be 'weights' or 'lca'")
        if self.overlap not in ("high", "low"):
            raise ValueError("overlap must be 'high' or 'low'")
        if self.patterns not in ("disjoint", "non_disjoint"):
            raise ValueError("patterns must be 'disjoint' or 'non_disjoint'")
        unknown = [m for m in self.roster if m not in _WEIGHT_MODELS]
        if unknown:
            raise ValueError(f"unknown weight models: {unknown}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")


_BASE_LCA = dict(kind="lca", overlap="high", fracs=(0.05, 0.05))

_REGISTRY = {
    "1A": dict(kind="weights", overlap="high"),
    "1B": dict(kind="weights", overlap="low"),
    "2A": dict(_BASE_LCA),
    "2B": dict(_BASE_LCA, overlap="low"),
    "2C": dict(_BASE_LCA, fracs=(0.01, 0.01)),
    "2D": dict(_BASE_LCA, overlap="low", fracs=(0.01, 0.01)),
    # cohort-style setting: a tiny opt-in sample beside a large survey
    "2E": dict(_BASE_LCA, n_pop=200_000, fracs=(0.00075, 0.0375)),
    "2F": dict(_BASE_LCA, overlap="low", n_pop=200_000, fracs=(0.00075, 0.0375)),
    "2G": dict(_BASE_LCA, patterns="non_disjoint"),
    "2H": dict(_BASE_LCA, d_draws=10),
    "2I": dict(_BASE_LCA, missing_covariates=True),
    "2J": dict(_BASE_LCA, adjust=False),
}


def scenario_ids() -> list[str]:
    """All registered scenario identifiers, study 1 first."""
    return list(_REGISTRY)


def scenario_config(scenario: str, **overrides) -> ScenarioConfig:
    """Look up a scenario by id and apply keyword overrides."""
    key = scenario.upper()
    if key not in _REGISTRY:
        raise ValueError(f"unknown scenario {scenario!r}; known: {', '.join(_REGISTRY)}")
    cfg = ScenarioConfig(scenario=key, **_REGISTRY[key])
    return replace(cfg, **overrides) if overrides else cfg


def _tables(cfg: ScenarioConfig) -> simgen.BetaTables:
    if cfg.patterns == "non_disjoint":
        return simgen.non_disjoint_tables()
    return simgen.baseline_tables()


def _weight_features(aux: np.ndarray, missing: bool) -> np.ndarray:
    """Covariates given to the weight models.

    The full set is (a1, a2, a3, a1*a2); the degraded set drops a3 and the
    product term, mimicking an analyst who never observed them.
    """
    a1, a2, a3 = aux[:, 0], aux[:, 1], aux[:, 2]
    if missing:
        return np.column_stack([a1, a2])
    return np.column_stack([a1, a2, a3, a1 * a2])


def _logreg_point_weights(feat_b, feat_r, pi_r) -> np.ndarray:
    """Parametric comparator: logistic propensity, least-squares inclusion."""
    stacked = np.vstack([feat_b, feat_r])
    z = np.concatenate([np.ones(len(feat_b)), np.zeros(len(feat_r))])
    design = np.column_stack([np.ones(len(stacked)), stacked])
    beta, _, _ = _newton_mode(design, z, np.ones(len(z)), prior_var=1e6)
    pi_z = expit(np.column_stack([np.ones(len(feat_b)), feat_b]) @ beta)

    lhs = np.column_stack([np.ones(len(feat_r)), feat_r])
    coef, *_ = np.linalg.lstsq(lhs, logit(pi_r), rcond=None)
    pi_r_hat = expit(np.column_stack([np.ones(len(feat_b)), feat_b]) @ coef)

    draws = build_weight_draws(pi_z[:, None], pi_r_hat[:, None], 1.0, 1.0, trim_c=None)
    return draws.means


def estimate_model_weights(model: str, pop, b_idx, r_idx, seed) -> np.ndarray:
    """Estimated weights for the sampled NPS units under one roster model."""
    kind, m_draws, missing = _WEIGHT_MODELS[model]
    if kind == "none":
        return np.ones(b_idx.shape[0])
    feat_b = _weight_features(pop.aux[b_idx], missing)
    feat_r = _weight_features(pop.aux[r_idx], missing)
    pi_r = pop.pi_r[r_idx]
    if kind == "logreg":
        return _logreg_point_weights(feat_b, feat_r, pi_r)
    cfg = PseudoWeightConfig(n_draws=m_draws, trim_c=None)
    nps = NonProbabilitySampleData(aux=feat_b)
    ps = ProbabilitySampleData(aux=feat_r, pi_r=pi_r)
    return estimate_pseudo_weights(nps, ps, cfg, seed).means


def run_weight_replicate(cfg: ScenarioConfig, setting, seed) -> list[dict]:
    """One study-1 replicate at one sampling-fraction setting.

    Returns a metric row per roster model; every model sees the same
    generated population and samples.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_pop, s_b, s_r, *s_models = ss.spawn(3 + len(cfg.roster))
    pop = simgen.make_population(cfg.n_pop, s_pop, cfg.overlap, tuple(setting))
    b_idx = simgen.poisson_sample(pop.pi_b, s_b)
    r_idx = simgen.poisson_sample(pop.pi_r, s_r)
    if b_idx.size < 2 or r_idx.size < 2:
        raise RuntimeError(
            f"degenerate samples: n_B={b_idx.size}, n_R={r_idx.size}"
        )
    truth = pop.true_weights[b_idx]
    label = f"{100 * setting[0]:g}%/{100 * setting[1]:g}%"
    rows = []
    for model, s_m in zip(cfg.roster, s_models):
        est = estimate_model_weights(model, pop, b_idx, r_idx, s_m)
        rows.append(
            {
                "model": model,
                "setting": label,
                "overlap": cfg.overlap,
                "n_b": int(b_idx.size),
                "n_r": int(r_idx.size),
                "wts_abs_bias": weight_abs_bias(est, truth),
            }
        )
    return rows


def _lca_chain_config(cfg: ScenarioConfig, adjust: bool) -> WolcanConfig:
    return WolcanConfig(
        k_max=cfg.k_max,
        adaptive_iters=cfg.adaptive_iters,
        adaptive_burn=cfg.adaptive_burn,
        adaptive_thin=cfg.adaptive_thin,
        fixed_iters=cfg.fixed_iters,
        fixed_burn=cfg.fixed_burn,
        fixed_thin=cfg.fixed_thin,
        adjust=adjust,
    )


def run_lca_replicate(cfg: ScenarioConfig, seed) -> list[dict]:
    """One study-2 replicate: weighted pipeline plus unweighted comparator.

    Both models are fit to the same NPS item data; truth is the realized
    population (class shares and class-conditional item frequencies).
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_pop, s_b, s_r, s_w, s_fit, s_unw = ss.spawn(6)
    pop = simgen.make_population(cfg.n_pop, s_pop, cfg.overlap, cfg.fracs, _tables(cfg))
    b_idx = simgen.poisson_sample(pop.pi_b, s_b)
    r_idx = simgen.poisson_sample(pop.pi_r, s_r)
    if b_idx.size < 10 or r_idx.size < 10:
        raise RuntimeError(
            f"degenerate samples: n_B={b_idx.size}, n_R={r_idx.size}"
        )

    feat_b = _weight_features(pop.aux[b_idx], cfg.missing_covariates)
    feat_r = _weight_features(pop.aux[r_idx], cfg.missing_covariates)
    nps = NonProbabilitySampleData(aux=feat_b, items=pop.items[b_idx])
    ps = ProbabilitySampleData(aux=feat_r, pi_r=pop.pi_r[r_idx])
    wcfg = PseudoWeightConfig(n_draws=cfg.m_draws, trim_c=cfg.trim_c)
    weight_draws = estimate_pseudo_weights(nps, ps, wcfg, s_w)
    selected = select_weight_draws(weight_draws, cfg.d_draws)

    x_b = pop.items[b_idx]
    n_levels = np.full(x_b.shape[1], simgen.R_LEVELS, dtype=np.int64)
    pi_true, theta_true = population_truth(
        pop.classes, pop.items, simgen.K_CLASSES, n_levels
    )

    fits = {
        "WOLCAN": (
            fit_wolcan(
                x_b,
                selected,
                _lca_chain_config(cfg, cfg.adjust),
                seed=s_fit,
                mean_weights=weight_draws.means,
                n_levels=n_levels,
            ),
            weight_draws.means,
        ),
        "Unweighted": (
            fit_wolcan(
                x_b,
                [np.ones(b_idx.size)],
                _lca_chain_config(cfg, adjust=False),
                seed=s_unw,
                n_levels=n_levels,
            ),
            np.ones(b_idx.size),
        ),
    }

    rows = []
    for model, (fit, est_w) in fits.items():
        m = lca_replicate_metrics(fit.estimates, fit.k_hat, pi_true, theta_true)
        rows.append(
            {
                "model": model,
                "setting": f"{100 * cfg.fracs[0]:g}%/{100 * cfg.fracs[1]:g}%",
                "overlap": cfg.overlap,
                "n_b": int(b_idx.size),
                "n_r": int(r_idx.size),
                "k_hat": fit.k_hat,
                "converged": bool(fit.converged),
                "wts_abs_bias": weight_abs_bias(est_w, pop.true_weights[b_idx]),
                **m,
            }
        )
    return rows
