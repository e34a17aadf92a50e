"""Label alignment across chains and stacking into one posterior."""
from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import PosteriorChain, StackedPosterior

EXHAUSTIVE_LIMIT = 10


def _pairwise_cost(anchor: np.ndarray, theta_bar: np.ndarray) -> np.ndarray:
    """cost[a, b]: mean absolute distance from anchor class a to class b."""
    diff = np.abs(theta_bar[:, None, :, :] - anchor[:, :, None, :])
    return diff.mean(axis=(0, 3))


def best_permutation(anchor: np.ndarray, theta_bar: np.ndarray) -> np.ndarray:
    """Class order of theta_bar that best matches the anchor means.

    Exhaustive search (first permutation wins ties) up to 10 classes;
    Hungarian assignment on the pairwise mean-absolute-distance matrix
    beyond that.
    """
    k = anchor.shape[1]
    if k <= EXHAUSTIVE_LIMIT:
        best, best_cost = None, np.inf
        for perm in permutations(range(k)):
            cost = np.abs(theta_bar[:, perm, :] - anchor).mean()
            if cost < best_cost:
                best, best_cost = perm, cost
        return np.asarray(best, dtype=np.int64)
    _, cols = linear_sum_assignment(_pairwise_cost(anchor, theta_bar))
    return cols.astype(np.int64)


def _permute_chain(chain: PosteriorChain, perm: np.ndarray) -> PosteriorChain:
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    return PosteriorChain(
        pi=chain.pi[:, perm],
        theta=chain.theta[:, :, perm, :],
        c=(inverse[chain.c - 1] + 1).astype(chain.c.dtype),
        nonempty=chain.nonempty,
        n_levels=chain.n_levels,
        alpha_pi=chain.alpha_pi[perm],
        n_candidates=chain.n_candidates,
        converged=chain.converged,
    )


def align_labels(chains):
    """Relabel every chain's classes to match the first chain.

    For each chain past the first, picks the permutation minimizing the mean
    absolute distance between posterior-mean theta arrays, then applies it
    consistently to pi, theta, and the assignments.

    Returns
    -------
    (list of ndarray, list of PosteriorChain)
        Per-chain permutations (identity for the anchor) and the relabeled
        chains.
    """
    if not chains:
        raise ValueError("no chains to align")
    k = chains[0].n_classes
    if any(ch.n_classes != k for ch in chains):
        raise ValueError("all chains must share the same number of classes")
    anchor = chains[0].theta.mean(axis=0)
    perms = [np.arange(k, dtype=np.int64)]
    aligned = [chains[0]]
    for chain in chains[1:]:
        perm = best_permutation(anchor, chain.theta.mean(axis=0))
        perms.append(perm)
        aligned.append(_permute_chain(chain, perm))
    return perms, aligned


def stack_chains(chains) -> StackedPosterior:
    """Concatenate aligned chains, recording which draw each sample came from."""
    if not chains:
        raise ValueError("no chains to stack")
    k = chains[0].n_classes
    if any(ch.n_classes != k for ch in chains):
        raise ValueError("all chains must share the same number of classes")
    draw_index = np.concatenate(
        [np.full(ch.n_draws, d + 1, dtype=np.int64) for d, ch in enumerate(chains)]
    )
    return StackedPosterior(
        pi=np.concatenate([ch.pi for ch in chains], axis=0),
        theta=np.concatenate([ch.theta for ch in chains], axis=0),
        c=np.concatenate([ch.c for ch in chains], axis=0),
        draw_index=draw_index,
        n_levels=chains[0].n_levels,
    )
