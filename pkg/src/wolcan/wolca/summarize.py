"""Point estimates, intervals, and class assignment from a stacked posterior."""
from __future__ import annotations

import numpy as np

from .types import LcaEstimates, StackedPosterior, validate_items

_LOG_FLOOR = 1e-300


def summarize(stacked: StackedPosterior) -> LcaEstimates:
    """Cellwise posterior medians (renormalized) and equal-tailed 95% bands.

    Medians of simplex coordinates need not sum to one, so pi and each
    active theta row are rescaled to unit mass; interval endpoints are
    reported raw.
    """
    if stacked.n_samples == 0:
        raise ValueError("stacked posterior is empty")
    pi_med = np.median(stacked.pi, axis=0)
    pi_med = pi_med / pi_med.sum()
    pi_lo, pi_hi = np.quantile(stacked.pi, [0.025, 0.975], axis=0)

    theta_med = np.median(stacked.theta, axis=0)
    theta_med = theta_med / theta_med.sum(axis=2, keepdims=True)
    theta_lo, theta_hi = np.quantile(stacked.theta, [0.025, 0.975], axis=0)

    return LcaEstimates(
        pi_median=pi_med,
        pi_lower=pi_lo,
        pi_upper=pi_hi,
        theta_median=theta_med,
        theta_lower=theta_lo,
        theta_upper=theta_hi,
        n_levels=stacked.n_levels,
    )


def class_membership(x, pi_hat, theta_hat) -> np.ndarray:
    """Posterior membership probabilities P(c_i = k | x_i) at point estimates."""
    x = validate_items(x)
    n, j_dim = x.shape
    k = pi_hat.shape[0]
    r_dim = theta_hat.shape[2]
    log_theta = np.log(np.maximum(theta_hat, _LOG_FLOOR))
    flat = log_theta.transpose(0, 2, 1).reshape(j_dim * r_dim, k)
    idx = ((np.arange(j_dim) * r_dim)[None, :] + (x - 1)).ravel()
    ll = flat[idx].reshape(n, j_dim, k).sum(axis=1)
    ll += np.log(np.maximum(pi_hat, _LOG_FLOOR))[None, :]
    ll -= ll.max(axis=1, keepdims=True)
    post = np.exp(ll)
    return post / post.sum(axis=1, keepdims=True)


def assign_classes(x, pi_hat, theta_hat, seed=0):
    """Sample one class per unit from its posterior membership distribution.

    Returns
    -------
    (ndarray, ndarray)
        1-based class labels of shape (n,) and the (n, K) membership
        probability matrix they were drawn from.
    """
    post = class_membership(x, pi_hat, theta_hat)
    rng = np.random.default_rng(seed)
    u = rng.random(post.shape[0])
    cum = np.cumsum(post, axis=1)
    c0 = (u[:, None] > cum).sum(axis=1)
    c0 = np.minimum(c0, post.shape[1] - 1)
    return c0 + 1, post
