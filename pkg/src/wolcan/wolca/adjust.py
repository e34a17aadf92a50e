"""Post-hoc variance adjustment for weighted posterior chains.

Pseudo-likelihood posteriors contract as if the weighted sample were real
data, so their spread misstates the design variance. The fix rescales draws
in an unconstrained space: with R1'R1 the inverse posterior covariance and
R2'R2 = H J^-1 H the sandwich information, the map
xi -> xi_bar + R2^-1 R1 (xi - xi_bar) gives draws whose covariance matches
the sandwich estimator H^-1 J H^-1.

H and J are computed analytically from the weighted complete-data
log-posterior, holding each unit's class at its modal assignment across the
chain; the near-deterministic memberships this sampler targets make that a
good stand-in for the intractable marginal derivatives.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .._linalg import chol_upper
from .types import PosteriorChain

_PROB_FLOOR = 1e-12


def _blocks(n_classes: int, n_levels: np.ndarray):
    """(offset, length) per unconstrained block: pi first, then theta_jk."""
    blocks = []
    pos = 0
    if n_classes > 1:
        blocks.append(("pi", None, None, pos, n_classes - 1))
        pos += n_classes - 1
    for j, r_j in enumerate(int(r) for r in n_levels):
        if r_j < 2:
            continue
        for k in range(n_classes):
            blocks.append(("theta", j, k, pos, r_j - 1))
            pos += r_j - 1
    return blocks, pos


def _to_alr(p: np.ndarray) -> np.ndarray:
    """Additive log-ratio against the last coordinate, row-wise."""
    p = np.maximum(p, _PROB_FLOOR)
    return np.log(p[..., :-1]) - np.log(p[..., -1:])


def _from_alr(xi: np.ndarray) -> np.ndarray:
    """Inverse alr: softmax of (xi, 0), row-wise."""
    full = np.concatenate([xi, np.zeros(xi.shape[:-1] + (1,))], axis=-1)
    full -= full.max(axis=-1, keepdims=True)
    e = np.exp(full)
    return e / e.sum(axis=-1, keepdims=True)


def chain_to_unconstrained(chain: PosteriorChain) -> np.ndarray:
    """Stack alr coordinates of pi and every active theta row, per draw."""
    blocks, dim = _blocks(chain.n_classes, chain.n_levels)
    xi = np.empty((chain.n_draws, dim))
    for kind, j, k, pos, length in blocks:
        if kind == "pi":
            xi[:, pos : pos + length] = _to_alr(chain.pi)
        else:
            xi[:, pos : pos + length] = _to_alr(chain.theta[:, j, k, : length + 1])
    return xi


def _unconstrained_to_params(xi: np.ndarray, chain: PosteriorChain):
    s = xi.shape[0]
    j_dim, _, r_dim = chain.theta.shape[1:]
    k = chain.n_classes
    blocks, _ = _blocks(k, chain.n_levels)
    pi = np.ones((s, k))
    theta = np.zeros((s, j_dim, k, r_dim))
    for j, r_j in enumerate(int(r) for r in chain.n_levels):
        if r_j == 1:
            theta[:, j, :, 0] = 1.0
    for kind, j, kk, pos, length in blocks:
        probs = _from_alr(xi[:, pos : pos + length])
        if kind == "pi":
            pi = probs
        else:
            theta[:, j, kk, : length + 1] = probs
    return pi, theta


def _modal_assignments(c: np.ndarray, n_classes: int) -> np.ndarray:
    modal = np.empty(c.shape[1], dtype=np.int64)
    for i in range(c.shape[1]):
        modal[i] = np.bincount(c[:, i], minlength=n_classes + 1)[1:].argmax()
    return modal


def _hessian_and_scores(chain, x, w, pi0, theta0, c_modal):
    """Analytic complete-data H (negative log-posterior curvature) and
    per-unit score contributions at (pi0, theta0) with classes fixed."""
    n = x.shape[0]
    k = chain.n_classes
    blocks, dim = _blocks(k, chain.n_levels)
    hess = np.zeros((dim, dim))
    scores = np.zeros((n, dim))

    def curvature(p, total):
        head = p[:-1]
        return total * (np.diag(head) - np.outer(head, head))

    for kind, j, kk, pos, length in blocks:
        sl = slice(pos, pos + length)
        if kind == "pi":
            counts = np.bincount(c_modal, weights=w, minlength=k)
            hess[sl, sl] = curvature(pi0, chain.alpha_pi.sum() + counts.sum())
            scores[:, sl] = w[:, None] * (
                (c_modal[:, None] == np.arange(k - 1)[None, :]) - pi0[None, :-1]
            )
        else:
            r_j = length + 1
            rows = np.flatnonzero(c_modal == kk)
            p = theta0[j, kk, :r_j]
            tallies = np.bincount(x[rows, j] - 1, weights=w[rows], minlength=r_j)
            hess[sl, sl] = curvature(p, r_j + tallies.sum())
            onehot = (x[rows, j, None] - 1) == np.arange(r_j - 1)[None, :]
            scores[rows, sl] = w[rows, None] * (onehot - p[None, :-1])

    centered = scores - scores.mean(axis=0, keepdims=True)
    j_hat = centered.T @ centered * (n / (n - 1))
    return hess, j_hat


def variance_adjust(
    chain: PosteriorChain, x, weights, return_diagnostics: bool = False
):
    """Rescale a chain's draws so their spread matches the sandwich variance.

    Parameters
    ----------
    chain : PosteriorChain
        Output of the fixed sampler (at least 200 retained draws).
    x : ndarray, shape (n, J)
        The item matrix the chain was fit to.
    weights : ndarray, shape (n,)
        The weights the chain was fit with; renormalized to sum to n here.
    return_diagnostics : bool
        Also return a dict with H, J, the posterior covariance, and the
        unconstrained coordinates before and after adjustment.

    Returns
    -------
    PosteriorChain or (PosteriorChain, dict)
        A new chain with adjusted pi and theta; assignments, occupancy
        counts, and flags carry over unchanged.
    """
    if chain.n_draws < 200:
        raise ValueError("variance adjustment needs at least 200 retained draws")
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[0]
    w = np.asarray(weights, dtype=float)
    w = w * (n / w.sum())

    _, dim = _blocks(chain.n_classes, chain.n_levels)
    if dim == 0:
        return (chain, {}) if return_diagnostics else chain

    xi = chain_to_unconstrained(chain)
    xi_bar = xi.mean(axis=0)
    sigma = np.cov(xi, rowvar=False, ddof=1).reshape(dim, dim)

    pi0, theta0 = (arr[0] for arr in _unconstrained_to_params(xi_bar[None, :], chain))
    c_modal = _modal_assignments(chain.c, chain.n_classes)
    hess, j_hat = _hessian_and_scores(chain, x, w, pi0, theta0, c_modal)

    r1 = chol_upper(np.linalg.inv(sigma), "posterior covariance inverse")
    r_j = chol_upper(j_hat, "score covariance")
    j_inv_h = solve_triangular(
        r_j, solve_triangular(r_j.T, hess, lower=True), lower=False
    )
    r2 = chol_upper(hess @ j_inv_h, "sandwich information H J^-1 H")
    amap = solve_triangular(r2, r1, lower=False)
    xi_adj = xi_bar[None, :] + (xi - xi_bar[None, :]) @ amap.T

    pi_adj, theta_adj = _unconstrained_to_params(xi_adj, chain)
    adjusted = PosteriorChain(
        pi=pi_adj,
        theta=theta_adj,
        c=chain.c,
        nonempty=chain.nonempty,
        n_levels=chain.n_levels,
        alpha_pi=chain.alpha_pi,
        n_candidates=chain.n_candidates,
        converged=chain.converged,
    )
    if return_diagnostics:
        info = {
            "hessian": hess,
            "score_cov": j_hat,
            "posterior_cov": sigma,
            "xi": xi,
            "xi_adjusted": xi_adj,
            "xi_mean": xi_bar,
        }
        return adjusted, info
    return adjusted
