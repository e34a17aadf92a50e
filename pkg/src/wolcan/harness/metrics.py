"""Evaluation metrics for simulation scenarios."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def metric_coverage(intervals, truths) -> float:
    """Share of intervals containing their true value.

    ``intervals`` is a pair (lower, upper) of equal-length arrays or an
    (n, 2) array; ``truths`` the matching true values.
    """
    if isinstance(intervals, np.ndarray) and intervals.ndim == 2 and intervals.shape[1] == 2:
        lower, upper = intervals[:, 0].astype(float), intervals[:, 1].astype(float)
    else:
        lo, hi = intervals
        lower, upper = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if lower.size == 0:
        raise ValueError("no intervals given")
    if lower.shape != truths.shape or upper.shape != truths.shape:
        raise ValueError("intervals and truths must have equal length")
    return float(np.mean((lower <= truths) & (truths <= upper)))


def population_truth(classes, items, n_classes, n_levels):
    """Finite-population class shares and class-conditional item frequencies.

    Returns (pi_true, theta_true) with theta padded to R = max(n_levels).
    """
    classes = np.asarray(classes, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    n, j_dim = items.shape
    r_dim = int(np.max(n_levels))
    pi_true = np.bincount(classes - 1, minlength=n_classes) / n
    theta_true = np.zeros((j_dim, n_classes, r_dim))
    for k in range(n_classes):
        rows = classes == k + 1
        count = rows.sum()
        for j in range(j_dim):
            if count:
                freq = np.bincount(items[rows, j] - 1, minlength=r_dim)
                theta_true[j, k] = freq / count
    return pi_true, theta_true


def match_classes(theta_est, theta_true) -> np.ndarray:
    """Injective map from true classes to estimated classes.

    Solves the assignment problem on mean absolute theta distance; entry t
    is the estimated class paired with true class t, or -1 when there are
    fewer estimated classes than true ones.
    """
    k_true = theta_true.shape[1]
    k_est = theta_est.shape[1]
    cost = np.abs(theta_true[:, :, None, :] - theta_est[:, None, :, :]).mean(axis=(0, 3))
    rows, cols = linear_sum_assignment(cost)
    matched = np.full(k_true, -1, dtype=np.int64)
    matched[rows] = cols
    return matched


def lca_replicate_metrics(estimates, k_hat, pi_true, theta_true):
    """Per-replicate metric row for one fitted latent class model.

    Classes are matched to the truth by minimum mean absolute theta
    distance. A true class with no estimated partner (k_hat < K) counts
    its full share and modal probability as bias and as a coverage miss;
    widths average over matched classes only. Theta metrics look at each
    (item, class) modal level of the true profile.
    """
    k_true = pi_true.shape[0]
    j_dim = theta_true.shape[0]
    matched = match_classes(estimates.theta_median, theta_true)

    pi_bias, pi_width, pi_cover = [], [], []
    th_bias, th_width, th_cover = [], [], []
    modal = theta_true.argmax(axis=2)
    for t in range(k_true):
        e = matched[t]
        if e < 0:
            pi_bias.append(pi_true[t])
            pi_cover.append(0.0)
            th_bias.extend(theta_true[np.arange(j_dim), t, modal[:, t]])
            th_cover.extend(np.zeros(j_dim))
            continue
        pi_bias.append(abs(estimates.pi_median[e] - pi_true[t]))
        pi_width.append(estimates.pi_upper[e] - estimates.pi_lower[e])
        pi_cover.append(
            float(estimates.pi_lower[e] <= pi_true[t] <= estimates.pi_upper[e])
        )
        rows = np.arange(j_dim)
        r_star = modal[:, t]
        truth_vals = theta_true[rows, t, r_star]
        est_vals = estimates.theta_median[rows, e, r_star]
        lo = estimates.theta_lower[rows, e, r_star]
        hi = estimates.theta_upper[rows, e, r_star]
        th_bias.extend(np.abs(est_vals - truth_vals))
        th_width.extend(hi - lo)
        th_cover.extend(((lo <= truth_vals) & (truth_vals <= hi)).astype(float))

    return {
        "k_abs_bias": float(abs(k_hat - k_true)),
        "pi_abs_bias": float(np.mean(pi_bias)),
        "pi_ci_width": float(np.mean(pi_width)) if pi_width else float("nan"),
        "pi_coverage": float(np.mean(pi_cover)),
        "theta_abs_bias": float(np.mean(th_bias)),
        "theta_ci_width": float(np.mean(th_width)) if th_width else float("nan"),
        "theta_coverage": float(np.mean(th_cover)),
    }


def weight_abs_bias(estimated, true_weights) -> float:
    """Mean absolute error of estimated weights against design weights."""
    estimated = np.asarray(estimated, dtype=float)
    true_weights = np.asarray(true_weights, dtype=float)
    if estimated.shape != true_weights.shape:
        raise ValueError("weight vectors must share a shape")
    return float(np.abs(estimated - true_weights).mean())
