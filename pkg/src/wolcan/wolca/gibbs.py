"""Weighted Gibbs sampler for overfitted latent class models.

Two entry points wrap one engine. ``adaptive_sampler`` runs with many class
slots and a sparsity prior Dir(1/K_max) to estimate how many classes the data
support; ``fixed_sampler`` reruns with that many slots under a Dir(K_hat)
prior and keeps only iterations where every slot is occupied.

Weights enter as exponents on each unit's complete-data density, so a unit
with weight w counts like w copies of itself in every full conditional.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .types import PosteriorChain, infer_levels, validate_items

EMPTY_FRACTION = 0.05
_LOG_FLOOR = 1e-300


def normalize_weights(weights: np.ndarray, n: int | None = None) -> np.ndarray:
    """Rescale weights to sum to the sample size (or to n)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be 1-D")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")
    target = float(len(w) if n is None else n)
    # fsum is exactly rounded, so the scale factor is invariant to row order.
    return w * (target / math.fsum(w))


class _Engine:
    """Vectorized state and updates for one chain."""

    def __init__(self, x, weights, n_classes, alpha_pi, n_levels, rng):
        n, j_dim = x.shape
        r_dim = int(n_levels.max())
        self.n = n
        self.j_dim = j_dim
        self.k = n_classes
        self.r = r_dim
        self.w = weights
        self.alpha_pi = alpha_pi
        self.rng = rng
        self.threshold = EMPTY_FRACTION * weights.sum()

        x0 = x - 1
        # Gather index into log-theta flattened as (J*R, K): row j*R + x_ij.
        self.gather_idx = ((np.arange(j_dim) * r_dim)[None, :] + x0).ravel()
        # Count index into (J, K, R) flattened: j*K*R + c_i*R + x_ij.
        self.count_base = (np.arange(j_dim) * (n_classes * r_dim))[None, :] + x0
        self.w_rep = np.repeat(weights, j_dim)
        active = np.arange(r_dim)[None, :] < n_levels[:, None]
        self.mask = active[:, None, :]  # (J, 1, R) broadcasting over classes

        self.c0 = rng.integers(0, n_classes, size=n)
        self.pi = np.full(n_classes, 1.0 / n_classes)
        self.theta = np.where(self.mask, 1.0 / n_levels[:, None, None], 0.0)
        self.theta = np.broadcast_to(self.theta, (j_dim, n_classes, r_dim)).copy()
        self.counts = np.zeros(n_classes)

    def set_state(self, pi, theta, c0):
        self.pi = np.asarray(pi, dtype=float).copy()
        self.theta = np.asarray(theta, dtype=float).copy()
        self.c0 = np.asarray(c0, dtype=np.int64).copy()

    def draw_assignments(self):
        log_theta = np.log(np.where(self.mask, np.maximum(self.theta, _LOG_FLOOR), 1.0))
        flat = log_theta.transpose(0, 2, 1).reshape(self.j_dim * self.r, self.k)
        ll = flat[self.gather_idx].reshape(self.n, self.j_dim, self.k).sum(axis=1)
        ll += np.log(np.maximum(self.pi, _LOG_FLOOR))[None, :]
        ll *= self.w[:, None]
        gumbel = self.rng.gumbel(size=(self.n, self.k))
        self.c0 = np.argmax(ll + gumbel, axis=1)

    def draw_pi(self):
        self.counts = np.bincount(self.c0, weights=self.w, minlength=self.k)
        gam = self.rng.gamma(self.alpha_pi + self.counts)
        self.pi = gam / gam.sum()

    def draw_theta(self):
        idx = (self.count_base + (self.c0 * self.r)[:, None]).ravel()
        tallies = np.bincount(idx, weights=self.w_rep, minlength=self.j_dim * self.k * self.r)
        gam = self.rng.gamma(1.0 + tallies.reshape(self.j_dim, self.k, self.r))
        gam *= self.mask
        self.theta = gam / gam.sum(axis=2, keepdims=True)

    def step(self):
        self.draw_assignments()
        self.draw_pi()
        self.draw_theta()

    @property
    def nonempty(self) -> int:
        return int((self.counts > self.threshold).sum())


def _resolve_levels(x, n_levels):
    if n_levels is None:
        return infer_levels(x)
    n_levels = np.asarray(n_levels, dtype=np.int64)
    if n_levels.shape != (x.shape[1],):
        raise ValueError("n_levels must have one entry per item")
    if np.any(x.max(axis=0) > n_levels):
        raise ValueError("item codes exceed the declared level counts")
    return n_levels


def _canonical_order(unit_ids, n):
    if unit_ids is None:
        return np.arange(n)
    unit_ids = np.asarray(unit_ids)
    if unit_ids.shape != (n,) or len(np.unique(unit_ids)) != n:
        raise ValueError("unit_ids must be n distinct values")
    return np.argsort(unit_ids, kind="stable")


def gibbs_step(state, x, weights, alpha_pi, rng, n_levels=None):
    """One full scan of the three conditionals, returning the next state.

    Parameters
    ----------
    state : tuple of ndarray
        Current (pi, theta, c) with c labels in 1..K.
    x : ndarray, shape (n, J)
        Integer-coded items.
    weights : ndarray, shape (n,)
        Pseudo-weight exponents, used as given.
    alpha_pi : float or ndarray
        Dirichlet prior parameter(s) for pi.
    rng : numpy.random.Generator
        Source of randomness.
    n_levels : ndarray, optional
        Active levels per item; inferred from x when omitted.

    Returns
    -------
    tuple of ndarray
        Next (pi, theta, c); c again 1-based.
    """
    x = validate_items(x)
    n_levels = _resolve_levels(x, n_levels)
    pi, theta, c = state
    k = np.asarray(pi).shape[0]
    alpha = np.broadcast_to(np.asarray(alpha_pi, dtype=float), (k,))
    eng = _Engine(x, np.asarray(weights, dtype=float), k, alpha, n_levels, rng)
    eng.set_state(pi, theta, np.asarray(c, dtype=np.int64) - 1)
    eng.step()
    return eng.pi.copy(), eng.theta.copy(), eng.c0 + 1


def run_chain(
    x,
    weights,
    n_classes,
    alpha_pi,
    iters,
    burn,
    thin,
    seed,
    n_levels=None,
    unit_ids=None,
    keep_params=True,
):
    """Run one weighted Gibbs chain and collect post-burn, thinned draws.

    Weights are used exactly as passed. Units are processed in canonical
    unit-id order so that row permutations of (x, weights, unit_ids) leave
    the draw stream unchanged; returned assignment columns follow the input
    row order.
    """
    x = validate_items(x)
    n = x.shape[0]
    n_levels = _resolve_levels(x, n_levels)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError("weights must match the number of units")
    order = _canonical_order(unit_ids, n)

    rng = np.random.default_rng(seed)
    alpha = np.broadcast_to(np.asarray(alpha_pi, dtype=float), (n_classes,)).copy()
    eng = _Engine(x[order], w[order], n_classes, alpha, n_levels, rng)

    kept_pi, kept_theta, kept_c, kept_nonempty = [], [], [], []
    for it in range(1, iters + 1):
        eng.step()
        if it > burn and (it - burn) % thin == 0:
            kept_nonempty.append(eng.nonempty)
            if keep_params:
                kept_pi.append(eng.pi.copy())
                kept_theta.append(eng.theta.copy())
                kept_c.append(eng.c0 + 1)

    nonempty = np.asarray(kept_nonempty, dtype=np.int64)
    if not keep_params:
        return nonempty

    c_canonical = np.asarray(kept_c, dtype=np.int32)
    c_out = np.empty_like(c_canonical)
    c_out[:, order] = c_canonical
    return PosteriorChain(
        pi=np.asarray(kept_pi),
        theta=np.asarray(kept_theta),
        c=c_out,
        nonempty=nonempty,
        n_levels=n_levels,
        alpha_pi=alpha,
        n_candidates=len(nonempty),
    )


def adaptive_sampler(
    x,
    weights,
    k_max=30,
    iters=10_000,
    burn=5_000,
    thin=5,
    seed=0,
    n_levels=None,
    unit_ids=None,
):
    """Estimate the number of latent classes with an overfitted chain.

    Runs K_max class slots under the sparsity prior Dir(1/K_max) on pi and
    flat priors on theta, then reports the median count of occupied classes
    (weighted occupancy above 5% of the weight total) across retained
    iterations, rounding halves up.
    """
    x = validate_items(x)
    n = x.shape[0]
    if n < k_max:
        warnings.warn(
            f"sample size {n} is below k_max={k_max}; proceeding overfitted",
            stacklevel=2,
        )
    w = normalize_weights(weights, n)
    nonempty = run_chain(
        x,
        w,
        k_max,
        1.0 / k_max,
        iters,
        burn,
        thin,
        seed,
        n_levels=n_levels,
        unit_ids=unit_ids,
        keep_params=False,
    )
    return int(np.floor(np.median(nonempty) + 0.5))


def fixed_sampler(
    x,
    weights,
    k_hat,
    iters=20_000,
    burn=10_000,
    thin=5,
    seed=0,
    n_levels=None,
    unit_ids=None,
):
    """Posterior chain with K_hat class slots under a Dir(K_hat) prior.

    Retains only the post-burn iterations whose occupied-class count equals
    K_hat. If fewer than a quarter survive, the chain is flagged as
    non-converged; if none survive, all candidates are kept (flagged).
    """
    if k_hat < 1:
        raise ValueError("k_hat must be at least 1")
    x = validate_items(x)
    w = normalize_weights(weights, x.shape[0])
    chain = run_chain(
        x,
        w,
        k_hat,
        float(k_hat),
        iters,
        burn,
        thin,
        seed,
        n_levels=n_levels,
        unit_ids=unit_ids,
    )
    keep = chain.nonempty == k_hat
    kept = int(keep.sum())
    if kept == 0:
        warnings.warn(
            f"no iterations had {k_hat} occupied classes; keeping all draws",
            stacklevel=2,
        )
        chain.converged = False
        return chain
    if kept < 0.25 * chain.n_candidates:
        warnings.warn(
            f"only {kept}/{chain.n_candidates} iterations had {k_hat} occupied "
            "classes; treat this chain as non-converged",
            stacklevel=2,
        )
        chain.converged = False
    chain.pi = chain.pi[keep]
    chain.theta = chain.theta[keep]
    chain.c = chain.c[keep]
    chain.nonempty = chain.nonempty[keep]
    return chain


def dirichlet_update_shapes(x, c, weights, alpha_pi, n_classes, n_levels=None):
    """Dirichlet parameters of the pi and theta full conditionals.

    Returns (pi_shape, theta_shape) given assignments c (1-based). Exposed
    so the weighted updates can be checked against unweighted tallies.
    """
    x = validate_items(x)
    n_levels = _resolve_levels(x, n_levels)
    r_dim = int(n_levels.max())
    j_dim = x.shape[1]
    c0 = np.asarray(c, dtype=np.int64) - 1
    w = np.asarray(weights, dtype=float)
    alpha = np.broadcast_to(np.asarray(alpha_pi, dtype=float), (n_classes,))
    pi_shape = alpha + np.bincount(c0, weights=w, minlength=n_classes)
    idx = (
        (np.arange(j_dim) * (n_classes * r_dim))[None, :]
        + (x - 1)
        + (c0 * r_dim)[:, None]
    ).ravel()
    tallies = np.bincount(
        idx, weights=np.repeat(w, j_dim), minlength=j_dim * n_classes * r_dim
    )
    theta_shape = 1.0 + tallies.reshape(j_dim, n_classes, r_dim)
    return pi_shape, theta_shape
