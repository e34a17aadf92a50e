"""Weighted overfitted Bayesian latent class analysis."""
from .adjust import chain_to_unconstrained, variance_adjust
from .align import align_labels, best_permutation, stack_chains
from .gibbs import (
    adaptive_sampler,
    dirichlet_update_shapes,
    fixed_sampler,
    gibbs_step,
    normalize_weights,
    run_chain,
)
from .pipeline import WolcanConfig, WolcanFit, fit_wolcan
from .summarize import assign_classes, class_membership, summarize
from .types import (
    LcaEstimates,
    LcaParams,
    PosteriorChain,
    StackedPosterior,
    infer_levels,
)

__all__ = [
    "LcaEstimates",
    "LcaParams",
    "PosteriorChain",
    "StackedPosterior",
    "WolcanConfig",
    "WolcanFit",
    "adaptive_sampler",
    "align_labels",
    "assign_classes",
    "best_permutation",
    "chain_to_unconstrained",
    "class_membership",
    "dirichlet_update_shapes",
    "fit_wolcan",
    "fixed_sampler",
    "gibbs_step",
    "infer_levels",
    "normalize_weights",
    "run_chain",
    "stack_chains",
    "summarize",
    "variance_adjust",
]
