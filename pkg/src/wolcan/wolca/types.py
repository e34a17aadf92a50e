"""Containers shared across the weighted latent class sampler."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_TOL = 1e-10


def validate_items(items: np.ndarray) -> np.ndarray:
    """Coerce an item matrix to int64 codes starting at 1."""
    x = np.asarray(items)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError("item matrix must be 2-D and nonempty")
    if not np.issubdtype(x.dtype, np.integer):
        xf = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(xf)) or np.any(xf != np.round(xf)):
            raise ValueError("item matrix must be integer-coded")
        x = xf.astype(np.int64)
    else:
        x = x.astype(np.int64)
    if x.min() < 1:
        raise ValueError("item codes must start at 1")
    return x


def infer_levels(items: np.ndarray) -> np.ndarray:
    """Number of category levels per item, taken as the max observed code."""
    return validate_items(items).max(axis=0)


def _check_theta(theta: np.ndarray, n_levels: np.ndarray) -> None:
    j_dim, _, r_dim = theta.shape
    for j in range(j_dim):
        r_j = int(n_levels[j])
        rows = theta[j, :, :r_j]
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise ValueError(f"theta rows for item {j} do not sum to 1")
        if r_j < r_dim and np.any(theta[j, :, r_j:] != 0.0):
            raise ValueError(f"theta for item {j} has nonzero padded cells")


@dataclass(frozen=True)
class LcaParams:
    """Latent class parameters: class shares and item response probabilities.

    Attributes
    ----------
    pi : ndarray, shape (K,)
        Class membership probabilities, summing to 1.
    theta : ndarray, shape (J, K, R)
        Per item j and class k, a probability row over that item's levels,
        zero-padded out to R = max level count.
    n_levels : ndarray, shape (J,)
        Active level count per item.
    """

    pi: np.ndarray
    theta: np.ndarray
    n_levels: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        n_levels = np.asarray(self.n_levels, dtype=np.int64)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "n_levels", n_levels)
        if pi.ndim != 1 or abs(pi.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("pi must be a simplex vector")
        if theta.ndim != 3 or theta.shape[1] != pi.shape[0]:
            raise ValueError("theta must be (J, K, R) with K matching pi")
        if n_levels.shape != (theta.shape[0],):
            raise ValueError("n_levels must have one entry per item")
        if n_levels.max() > theta.shape[2] or n_levels.min() < 1:
            raise ValueError("n_levels out of range for theta's last axis")
        _check_theta(theta, n_levels)

    @property
    def n_classes(self) -> int:
        return self.pi.shape[0]


@dataclass
class PosteriorChain:
    """Retained draws from one sampler run.

    ``pi`` is (S, K), ``theta`` is (S, J, K, R), ``c`` is (S, n) with labels
    in 1..K, and ``nonempty`` counts the classes whose weighted occupancy
    cleared the emptiness threshold at each retained iteration.
    """

    pi: np.ndarray
    theta: np.ndarray
    c: np.ndarray
    nonempty: np.ndarray
    n_levels: np.ndarray
    alpha_pi: np.ndarray
    n_candidates: int
    converged: bool = True

    @property
    def n_draws(self) -> int:
        return self.pi.shape[0]

    @property
    def n_classes(self) -> int:
        return self.pi.shape[1]

    @property
    def n_units(self) -> int:
        return self.c.shape[1]


@dataclass
class StackedPosterior:
    """Aligned draws pooled across weight draws, with provenance."""

    pi: np.ndarray
    theta: np.ndarray
    c: np.ndarray
    draw_index: np.ndarray
    n_levels: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.pi.shape[0]

    @property
    def n_classes(self) -> int:
        return self.pi.shape[1]


@dataclass(frozen=True)
class LcaEstimates:
    """Posterior medians and equal-tailed 95% intervals."""

    pi_median: np.ndarray
    pi_lower: np.ndarray
    pi_upper: np.ndarray
    theta_median: np.ndarray
    theta_lower: np.ndarray
    theta_upper: np.ndarray
    n_levels: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.pi_median.shape[0]
