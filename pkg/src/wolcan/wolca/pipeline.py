"""End-to-end weighted latent class fit across pseudo-weight draws."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .adjust import variance_adjust
from .align import align_labels, stack_chains
from .gibbs import adaptive_sampler, fixed_sampler
from .summarize import assign_classes, summarize
from .types import LcaEstimates, StackedPosterior, validate_items


@dataclass(frozen=True)
class WolcanConfig:
    """Chain budgets and switches for the two-phase sampler."""

    k_max: int = 30
    adaptive_iters: int = 10_000
    adaptive_burn: int = 5_000
    adaptive_thin: int = 5
    fixed_iters: int = 20_000
    fixed_burn: int = 10_000
    fixed_thin: int = 5
    adjust: bool = True
    k_hat: int | None = None


@dataclass
class WolcanFit:
    """Everything the two-phase fit produces."""

    k_hat: int
    estimates: LcaEstimates
    stacked: StackedPosterior
    assignments: np.ndarray
    membership: np.ndarray
    permutations: list = field(default_factory=list)
    retention: np.ndarray | None = None
    converged: bool = True


def fit_wolcan(
    x,
    weight_draws,
    cfg: WolcanConfig | None = None,
    seed=0,
    mean_weights=None,
    n_levels=None,
):
    """Fit the weighted latent class model under weight-draw uncertainty.

    Parameters
    ----------
    x : ndarray, shape (n, J)
        Integer-coded item matrix.
    weight_draws : sequence of ndarray
        D pseudo-weight vectors, one fixed-phase chain each.
    cfg : WolcanConfig, optional
        Budgets and switches; ``cfg.k_hat`` skips the adaptive phase.
    seed : int or numpy.random.SeedSequence
        Master seed; the adaptive phase and each chain get independent
        children.
    mean_weights : ndarray, optional
        Weights for the adaptive phase; defaults to the mean of the draws.
    n_levels : ndarray, optional
        Active levels per item; inferred from x when omitted.

    Returns
    -------
    WolcanFit
        Estimated class count, stacked aligned posterior, summaries, and
        sampled class assignments.
    """
    cfg = cfg or WolcanConfig()
    x = validate_items(x)
    draws = [np.asarray(w, dtype=float) for w in weight_draws]
    if not draws:
        raise ValueError("need at least one weight draw")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_adapt, seed_assign, *seed_chains = ss.spawn(2 + len(draws))

    if cfg.k_hat is not None:
        k_hat = int(cfg.k_hat)
    else:
        adapt_w = np.mean(draws, axis=0) if mean_weights is None else mean_weights
        k_hat = adaptive_sampler(
            x,
            adapt_w,
            k_max=cfg.k_max,
            iters=cfg.adaptive_iters,
            burn=cfg.adaptive_burn,
            thin=cfg.adaptive_thin,
            seed=seed_adapt,
            n_levels=n_levels,
        )

    chains = []
    retention = np.empty(len(draws))
    for d, (w_d, seed_d) in enumerate(zip(draws, seed_chains)):
        chain = fixed_sampler(
            x,
            w_d,
            k_hat,
            iters=cfg.fixed_iters,
            burn=cfg.fixed_burn,
            thin=cfg.fixed_thin,
            seed=seed_d,
            n_levels=n_levels,
        )
        retention[d] = chain.n_draws / chain.n_candidates
        if cfg.adjust:
            try:
                chain = variance_adjust(chain, x, w_d)
            except (ValueError, np.linalg.LinAlgError) as err:
                warnings.warn(
                    f"variance adjustment skipped for draw {d + 1}: {err}",
                    stacklevel=2,
                )
                chain.converged = False
        chains.append(chain)

    perms, aligned = align_labels(chains)
    stacked = stack_chains(aligned)
    estimates = summarize(stacked)
    labels, membership = assign_classes(
        x, estimates.pi_median, estimates.theta_median, seed=seed_assign
    )
    return WolcanFit(
        k_hat=k_hat,
        estimates=estimates,
        stacked=stacked,
        assignments=labels,
        membership=membership,
        permutations=perms,
        retention=retention,
        converged=all(ch.converged for ch in chains),
    )
