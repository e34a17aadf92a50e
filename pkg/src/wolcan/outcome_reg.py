"""Weighted Bayesian logistic regression on latent classes and confounders.

The binary outcome is regressed on an intercept, indicator columns for
classes 2..K (class 1 is the reference), and optional confounders. Weights
enter as exponents on each unit's likelihood, a pseudo-likelihood whose
posterior spread is corrected by the same sandwich rescaling used for the
latent class chains. One chain runs per pseudo-weight draw and the draws
are pooled for reporting.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular
from scipy.special import expit

from ._linalg import chol_upper
from .wolca.gibbs import normalize_weights

SEPARATION_BOUND = 15.0


@dataclass(frozen=True)
class OutcomeDesign:
    """Outcome vector plus a full-rank design matrix with named columns."""

    y: np.ndarray
    matrix: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "columns", tuple(self.columns))
        if y.ndim != 1 or not np.all(np.isin(y, [0, 1])):
            raise ValueError("outcome must be a vector of 0/1 values")
        if mat.shape != (y.shape[0], len(self.columns)):
            raise ValueError("design matrix shape must match outcome and columns")
        if not np.all(np.isfinite(mat)):
            raise ValueError("design matrix contains non-finite values")
        if np.linalg.matrix_rank(mat) < mat.shape[1]:
            raise ValueError("design matrix is rank deficient")

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass
class CoefficientChain:
    """Post-burn coefficient draws from one weighted fit."""

    draws: np.ndarray
    columns: tuple[str, ...]
    mode: np.ndarray
    accept_rate: float
    separation: bool


@dataclass(frozen=True)
class OutcomePosterior:
    """Pooled coefficient draws and the odds-ratio report built from them."""

    draws: np.ndarray
    columns: tuple[str, ...]
    draw_index: np.ndarray
    or_median: np.ndarray
    or_lower: np.ndarray
    or_upper: np.ndarray
    direction_prob: np.ndarray


def build_design(y, assignments, n_classes, confounders=None, confounder_names=None):
    """Assemble the outcome design: intercept, class dummies, confounders.

    Class 1 is the reference level; column ``class_k`` is 1 when the unit
    was assigned class k.
    """
    y = np.asarray(y)
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape != (y.shape[0],):
        raise ValueError("assignments must align with the outcome vector")
    if assignments.min() < 1 or assignments.max() > n_classes:
        raise ValueError("assignments must lie in 1..n_classes")
    cols = [np.ones(y.shape[0])]
    names = ["intercept"]
    for k in range(2, n_classes + 1):
        cols.append((assignments == k).astype(float))
        names.append(f"class_{k}")
    if confounders is not None:
        conf = np.atleast_2d(np.asarray(confounders, dtype=float))
        if conf.shape[0] != y.shape[0]:
            conf = conf.T
        if confounder_names is None:
            confounder_names = [f"x{j + 1}" for j in range(conf.shape[1])]
        cols.extend(conf.T)
        names.extend(confounder_names)
    return OutcomeDesign(y=y, matrix=np.column_stack(cols), columns=names)


def _log_posterior(beta, x, y, w, prior_var):
    eta = x @ beta
    loglik = np.sum(w * (y * eta - np.logaddexp(0.0, eta)))
    return loglik - 0.5 * beta @ beta / prior_var


def _newton_mode(x, y, w, prior_var, max_iter=50, tol=1e-10):
    p_dim = x.shape[1]
    beta = np.zeros(p_dim)
    wandered = False
    for _ in range(max_iter):
        p = expit(x @ beta)
        grad = x.T @ (w * (y - p)) - beta / prior_var
        curv = x.T @ (x * (w * p * (1.0 - p))[:, None]) + np.eye(p_dim) / prior_var
        step = np.linalg.solve(curv, grad)
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            wandered = True
        if np.max(np.abs(step)) < tol:
            break
    return beta, curv, wandered


def fit_weighted_logit(
    design: OutcomeDesign,
    weights,
    prior_scale: float = 5.0,
    iters: int = 20_000,
    burn: int = 10_000,
    seed=0,
    adjust: bool = True,
) -> CoefficientChain:
    """Posterior draws for one weight vector.

    A Newton solve locates the posterior mode and curvature; an adaptive
    random-walk Metropolis chain (target acceptance 0.234, scale tuned
    during burn-in) samples around it; the retained draws are then
    sandwich-rescaled so their spread reflects the design variance rather
    than the pseudo-likelihood's overstated precision.
    """
    y = design.y
    if y.min() == y.max():
        raise ValueError("outcome must include both classes")
    x = design.matrix
    n, p_dim = x.shape
    w = normalize_weights(np.asarray(weights, dtype=float), n)
    prior_var = float(prior_scale) ** 2
    rng = np.random.default_rng(seed)

    mode, curv, wandered = _newton_mode(x, y, w, prior_var)
    separation = wandered or bool(np.max(np.abs(mode)) > SEPARATION_BOUND)
    if separation:
        warnings.warn(
            "separation detected in the outcome model; estimates lean on the prior",
            stacklevel=2,
        )

    prop_chol = np.linalg.cholesky(np.linalg.inv(curv))
    log_scale = np.log(2.38 / np.sqrt(p_dim))
    beta = mode.copy()
    log_post = _log_posterior(beta, x, y, w, prior_var)
    draws = np.empty((iters - burn, p_dim))
    accepted = 0
    for it in range(1, iters + 1):
        prop = beta + np.exp(log_scale) * (prop_chol @ rng.standard_normal(p_dim))
        lp = _log_posterior(prop, x, y, w, prior_var)
        accept = np.log(rng.random()) < lp - log_post
        if accept:
            beta, log_post = prop, lp
        if it <= burn:
            log_scale += (float(accept) - 0.234) / np.sqrt(it)
        else:
            draws[it - burn - 1] = beta
            accepted += int(accept)

    if adjust:
        draws = _sandwich_rescale(draws, x, y, w, prior_var)
    return CoefficientChain(
        draws=draws,
        columns=design.columns,
        mode=mode,
        accept_rate=accepted / (iters - burn),
        separation=separation,
    )


def _sandwich_rescale(draws, x, y, w, prior_var):
    n, p_dim = x.shape
    beta_bar = draws.mean(axis=0)
    sigma = np.cov(draws, rowvar=False, ddof=1).reshape(p_dim, p_dim)
    p = expit(x @ beta_bar)
    hess = x.T @ (x * (w * p * (1.0 - p))[:, None]) + np.eye(p_dim) / prior_var
    scores = (w * (y - p))[:, None] * x
    centered = scores - scores.mean(axis=0, keepdims=True)
    j_hat = centered.T @ centered * (n / (n - 1))

    r1 = chol_upper(np.linalg.inv(sigma), "posterior covariance inverse")
    r_j = chol_upper(j_hat, "score covariance")
    j_inv_h = solve_triangular(
        r_j, solve_triangular(r_j.T, hess, lower=True), lower=False
    )
    r2 = chol_upper(hess @ j_inv_h, "sandwich information H J^-1 H")
    amap = solve_triangular(r2, r1, lower=False)
    return beta_bar[None, :] + (draws - beta_bar[None, :]) @ amap.T


def predict_prob(design: OutcomeDesign, beta) -> np.ndarray:
    """Fitted outcome probabilities for coefficient vector(s) beta."""
    beta = np.asarray(beta, dtype=float)
    return expit(design.matrix @ beta.T)


def combine_draws(chains) -> OutcomePosterior:
    """Pool per-draw chains and report odds ratios.

    Concatenates coefficient draws across chains, then reports for each
    column the posterior median odds ratio exp(beta), the equal-tailed 95%
    interval, and the posterior probability that the odds ratio falls on
    the same side of 1 as its median.
    """
    if not chains:
        raise ValueError("no chains to combine")
    columns = chains[0].columns
    if any(ch.columns != columns for ch in chains):
        raise ValueError("chains must share design columns")
    draws = np.concatenate([ch.draws for ch in chains], axis=0)
    draw_index = np.concatenate(
        [np.full(ch.draws.shape[0], d + 1, dtype=np.int64) for d, ch in enumerate(chains)]
    )
    odds = np.exp(draws)
    or_median = np.median(odds, axis=0)
    or_lower, or_upper = np.quantile(odds, [0.025, 0.975], axis=0)
    above = (odds > 1.0).mean(axis=0)
    below = (odds < 1.0).mean(axis=0)
    direction = np.where(or_median > 1.0, above, np.maximum(above, below))
    direction = np.where(or_median < 1.0, below, direction)
    return OutcomePosterior(
        draws=draws,
        columns=columns,
        draw_index=draw_index,
        or_median=or_median,
        or_lower=or_lower,
        or_upper=or_upper,
        direction_prob=direction,
    )


def fit_outcome_across_draws(
    design: OutcomeDesign,
    weight_draws,
    prior_scale: float = 5.0,
    iters: int = 20_000,
    burn: int = 10_000,
    seed=0,
    adjust: bool = True,
) -> OutcomePosterior:
    """Fit one chain per pseudo-weight draw and pool them."""
    draws = list(weight_draws)
    if not draws:
        raise ValueError("need at least one weight draw")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    chains = [
        fit_weighted_logit(
            design,
            w_d,
            prior_scale=prior_scale,
            iters=iters,
            burn=burn,
            seed=child,
            adjust=adjust,
        )
        for w_d, child in zip(draws, ss.spawn(len(draws)))
    ]
    return combine_draws(chains)


def or_table_frame(posterior: OutcomePosterior) -> pd.DataFrame:
    """Odds-ratio report: one row per coefficient."""
    return pd.DataFrame(
        {
            "term": list(posterior.columns),
            "or": posterior.or_median,
            "ci_lower": posterior.or_lower,
            "ci_upper": posterior.or_upper,
            "direction_prob": posterior.direction_prob,
        }
    )


def load_outcome_csv(path, outcome_col, confounder_cols=None):
    """Read the outcome file: the binary outcome plus confounder columns."""
    frame = pd.read_csv(path)
    wanted = [outcome_col] + list(confounder_cols or [])
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise ValueError(f"outcome file missing columns: {missing}")
    y = frame[outcome_col].to_numpy()
    conf = (
        frame[list(confounder_cols)].to_numpy(dtype=float) if confounder_cols else None
    )
    return y, conf
