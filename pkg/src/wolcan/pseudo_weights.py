"""Pseudo-weight estimation for a non-probability sample.

Pipeline: stack the non-probability sample (NPS) on top of the reference
probability sample (PS), estimate the NPS-membership propensity with probit
trees, estimate each NPS unit's PS inclusion probability with continuous
trees on the logit scale, convert both into pseudo-inclusion probabilities,
invert into weights, trim, and pick representative posterior weight draws.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from .bart import BartConfig, fit_continuous_bart, fit_probit_bart

CLAMP_LO = 1e-6
CLAMP_HI = 1.0


@dataclass(frozen=True)
class ProbabilitySampleData:
    """Reference sample with known inclusion probabilities.

    Attributes
    ----------
    aux : ndarray, shape (n_R, Q)
        Auxiliary covariates.
    pi_r : ndarray, shape (n_R,)
        Design inclusion probabilities, each in (0, 1].
    p_r : float
        Frame coverage proportion in (0, 1].
    """

    aux: np.ndarray
    pi_r: np.ndarray
    p_r: float = 1.0

    def __post_init__(self):
        aux = np.asarray(self.aux, dtype=float)
        pi_r = np.asarray(self.pi_r, dtype=float)
        object.__setattr__(self, "aux", aux)
        object.__setattr__(self, "pi_r", pi_r)
        if aux.ndim != 2:
            raise ValueError("aux must be 2-D")
        if pi_r.shape != (aux.shape[0],):
            raise ValueError("pi_r length must match aux rows")
        if not np.all(np.isfinite(aux)):
            raise ValueError("aux contains non-finite values")
        if np.any(pi_r <= 0) or np.any(pi_r > 1):
            raise ValueError("pi_r must lie in (0, 1]")
        if not (0 < self.p_r <= 1):
            raise ValueError("p_r must lie in (0, 1]")

    @property
    def n(self) -> int:
        return self.aux.shape[0]


@dataclass(frozen=True)
class NonProbabilitySampleData:
    """Non-probability sample: auxiliaries plus optional item/outcome data."""

    aux: np.ndarray
    items: np.ndarray | None = None
    p_b: float = 1.0

    def __post_init__(self):
        aux = np.asarray(self.aux, dtype=float)
        object.__setattr__(self, "aux", aux)
        if aux.ndim != 2:
            raise ValueError("aux must be 2-D")
        if not np.all(np.isfinite(aux)):
            raise ValueError("aux contains non-finite values")
        if self.items is not None:
            items = np.asarray(self.items)
            object.__setattr__(self, "items", items)
            if items.shape[0] != aux.shape[0]:
                raise ValueError("items row count must match aux rows")
            if items.min() < 1:
                raise ValueError("item codes must start at 1")
        if not (0 < self.p_b <= 1):
            raise ValueError("p_b must lie in (0, 1]")

    @property
    def n(self) -> int:
        return self.aux.shape[0]


@dataclass(frozen=True)
class StackedSample:
    """NPS rows stacked above PS rows with the membership indicator z."""

    aux: np.ndarray
    z: np.ndarray
    n_nps: int
    n_ps: int


@dataclass(frozen=True)
class WeightDraws:
    """Pseudo-weight posterior draws and their per-unit means.

    ``draws`` has one row per NPS unit and one column per posterior draw;
    ``means`` is the row average, recomputed after trimming. ``bounds``
    records the per-draw trimming cap (inf when trimming is disabled).
    """

    draws: np.ndarray
    means: np.ndarray
    trim_c: float | None
    bounds: np.ndarray

    @property
    def n_units(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]


@dataclass(frozen=True)
class PseudoWeightConfig:
    """Knobs for the end-to-end pseudo-weight pipeline."""

    n_draws: int = 1000
    trim_c: float | None = 20.0
    burn: int = 100
    probit_trees: int = 50
    continuous_trees: int = 200


def stack(nps: NonProbabilitySampleData, ps: ProbabilitySampleData) -> StackedSample:
    """Concatenate NPS auxiliaries above PS auxiliaries.

    Overlap individuals simply appear twice, once per source; no linkage is
    attempted or needed.
    """
    if nps.n == 0:
        raise ValueError("NPS is empty")
    if ps.n == 0:
        raise ValueError("PS is empty")
    if nps.aux.shape[1] != ps.aux.shape[1]:
        raise ValueError(
            f"auxiliary column mismatch: NPS has {nps.aux.shape[1]}, PS has {ps.aux.shape[1]}"
        )
    aux = np.vstack([nps.aux, ps.aux])
    z = np.concatenate([np.ones(nps.n, dtype=np.int64), np.zeros(ps.n, dtype=np.int64)])
    return StackedSample(aux=aux, z=z, n_nps=nps.n, n_ps=ps.n)


def estimate_nps_propensity(
    stacked: StackedSample, cfg: BartConfig, seed
) -> np.ndarray:
    """Posterior draws of P(row is NPS | aux) for the NPS rows.

    Fits the probit trees on the full stacked sample and returns the
    training-row draws for the NPS block, shape (n_NPS, M).
    """
    post = fit_probit_bart(stacked.aux, stacked.z, cfg, seed)
    return post.draws_train[: stacked.n_nps]


def estimate_ps_inclusion_for_nps(
    ps: ProbabilitySampleData, nps_aux: np.ndarray, cfg: BartConfig, seed
) -> np.ndarray:
    """Posterior draws of each NPS unit's PS inclusion probability.

    Fits continuous trees to logit(pi_r) over the PS and predicts at the NPS
    rows; draws are mapped back through the inverse logit, so each lies in
    (0, 1). Shape (n_NPS, M).
    """
    if np.any(ps.pi_r >= 1.0):
        raise ValueError("pi_r of 1 has no logit; cannot train the inclusion model")
    nps_aux = np.asarray(nps_aux, dtype=float)
    post = fit_continuous_bart(ps.aux, logit(ps.pi_r), cfg, seed, x_test=nps_aux)
    return expit(post.draws_test)


def crisp_pseudo_inclusion(pi_z: float, pi_r: float, p_r: float, p_b: float) -> float:
    """Pseudo-inclusion probability from the membership propensity.

    Computes pi_z * pi_r * p_r / (p_b * (1 - pi_z)), clamped to
    [1e-6, 1]; the clamp keeps the implied weight finite and at least 1.
    """
    if not (0.0 < pi_z < 1.0):
        raise ValueError("pi_z must lie strictly inside (0, 1)")
    if not (0.0 < pi_r <= 1.0):
        raise ValueError("pi_r must lie in (0, 1]")
    if not (0.0 < p_r <= 1.0 and 0.0 < p_b <= 1.0):
        raise ValueError("coverage proportions must lie in (0, 1]")
    raw = pi_z * pi_r * p_r / (p_b * (1.0 - pi_z))
    return float(min(max(raw, CLAMP_LO), CLAMP_HI))


def _crisp_matrix(pi_z: np.ndarray, pi_r: np.ndarray, p_r: float, p_b: float) -> np.ndarray:
    raw = pi_z * pi_r * p_r / (p_b * (1.0 - pi_z))
    return np.clip(raw, CLAMP_LO, CLAMP_HI)


def build_weight_draws(
    pi_z_draws: np.ndarray,
    pi_r_draws: np.ndarray,
    p_r: float = 1.0,
    p_b: float = 1.0,
    trim_c: float | None = 20.0,
) -> WeightDraws:
    """Invert pseudo-inclusion probabilities into trimmed weight draws.

    Per draw m, weights are 1/pi_hat(m), then capped at
    Q2 + trim_c * (Q3 - Q1), quantiles taken over that draw's weights with
    linear interpolation. ``trim_c=None`` disables trimming.
    """
    pi_z_draws = np.asarray(pi_z_draws, dtype=float)
    pi_r_draws = np.asarray(pi_r_draws, dtype=float)
    if pi_z_draws.shape != pi_r_draws.shape:
        raise ValueError("propensity and inclusion draw matrices must share a shape")
    if pi_z_draws.ndim != 2:
        raise ValueError("draw matrices must be 2-D (units x draws)")
    if np.any(pi_z_draws <= 0) or np.any(pi_z_draws >= 1):
        raise ValueError("pi_z draws must lie strictly inside (0, 1)")
    if trim_c is not None and trim_c <= 0:
        raise ValueError("trim_c must be positive (or None to disable)")

    weights = 1.0 / _crisp_matrix(pi_z_draws, pi_r_draws, p_r, p_b)
    if trim_c is None:
        bounds = np.full(weights.shape[1], np.inf)
    else:
        q1, q2, q3 = np.quantile(weights, [0.25, 0.5, 0.75], axis=0)
        bounds = q2 + trim_c * (q3 - q1)
        weights = np.minimum(weights, bounds[None, :])
    return WeightDraws(
        draws=weights, means=weights.mean(axis=1), trim_c=trim_c, bounds=bounds
    )


def select_rank_positions(n_draws: int, n_select: int) -> np.ndarray:
    """1-indexed order-statistic ranks at the (d - 0.5)/D quantile positions."""
    d = np.arange(1, n_select + 1)
    return np.ceil((d - 0.5) * n_draws / n_select).astype(np.int64)


def select_weight_draws(w: WeightDraws, n_select: int) -> list[np.ndarray]:
    """Pick D weight draws at evenly spaced quantiles of total weight.

    Draws are ranked by their total weight sum; the returned list holds the
    draws whose ranks sit at positions ceil((d - 0.5) * M / D), d = 1..D,
    in ascending-total order. Ties in totals break by draw index.
    """
    m = w.n_draws
    if not (1 <= n_select <= m):
        raise ValueError(f"need 1 <= D <= {m}, got {n_select}")
    totals = w.draws.sum(axis=0)
    order = np.argsort(totals, kind="stable")
    ranks = select_rank_positions(m, n_select)
    chosen = order[ranks - 1]
    return [w.draws[:, j].copy() for j in chosen]


def estimate_pseudo_weights(
    nps: NonProbabilitySampleData,
    ps: ProbabilitySampleData,
    cfg: PseudoWeightConfig | None = None,
    seed=0,
) -> WeightDraws:
    """End-to-end pseudo-weight estimation for the NPS units."""
    cfg = cfg or PseudoWeightConfig()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_z, seed_r = ss.spawn(2)
    stacked = stack(nps, ps)
    probit_cfg = BartConfig(n_trees=cfg.probit_trees, n_draws=cfg.n_draws, burn=cfg.burn)
    cont_cfg = BartConfig(n_trees=cfg.continuous_trees, n_draws=cfg.n_draws, burn=cfg.burn)
    pi_z = estimate_nps_propensity(stacked, probit_cfg, seed_z)
    pi_r = estimate_ps_inclusion_for_nps(ps, nps.aux, cont_cfg, seed_r)
    return build_weight_draws(pi_z, pi_r, ps.p_r, nps.p_b, cfg.trim_c)


def load_nps_csv(path, aux_cols: list[str], item_cols: list[str] | None = None) -> NonProbabilitySampleData:
    """Read an NPS file: auxiliary columns by name, optional item columns."""
    frame = pd.read_csv(path)
    missing = [c for c in aux_cols if c not in frame.columns]
    if missing:
        raise ValueError(f"NPS file missing columns: {missing}")
    items = None
    if item_cols:
        missing = [c for c in item_cols if c not in frame.columns]
        if missing:
            raise ValueError(f"NPS file missing item columns: {missing}")
        items = frame[item_cols].to_numpy(dtype=np.int64)
    return NonProbabilitySampleData(aux=frame[aux_cols].to_numpy(dtype=float), items=items)


def load_ps_csv(path, aux_cols: list[str], pi_col: str = "pi_R") -> ProbabilitySampleData:
    """Read a PS file: auxiliary columns by name plus the inclusion column."""
    frame = pd.read_csv(path)
    missing = [c for c in aux_cols + [pi_col] if c not in frame.columns]
    if missing:
        raise ValueError(f"PS file missing columns: {missing}")
    return ProbabilitySampleData(
        aux=frame[aux_cols].to_numpy(dtype=float),
        pi_r=frame[pi_col].to_numpy(dtype=float),
    )


def weight_draws_frame(w: WeightDraws) -> pd.DataFrame:
    """Weight draws as a units x draws table with draw_0001-style headers."""
    cols = {f"draw_{m + 1:04d}": w.draws[:, m] for m in range(w.n_draws)}
    return pd.DataFrame(cols)


def weight_means_frame(w: WeightDraws) -> pd.DataFrame:
    return pd.DataFrame({"unit": np.arange(1, w.n_units + 1), "weight": w.means})
