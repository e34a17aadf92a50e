"""Pseudo-weighted Bayesian latent class analysis for non-probability samples.

The package covers the full pipeline: tree-ensemble estimation of
pseudo-weights from a stacked non-probability + reference sample, a
weighted overfitted latent class sampler that propagates weight
uncertainty, a weighted logistic outcome stage, and a simulation harness
that exercises everything end to end.
"""
from .bart import BartConfig, fit_continuous_bart, fit_probit_bart
from .outcome_reg import (
    OutcomeDesign,
    OutcomePosterior,
    build_design,
    combine_draws,
    fit_outcome_across_draws,
    fit_weighted_logit,
    or_table_frame,
)
from .pseudo_weights import (
    NonProbabilitySampleData,
    ProbabilitySampleData,
    PseudoWeightConfig,
    WeightDraws,
    build_weight_draws,
    crisp_pseudo_inclusion,
    estimate_pseudo_weights,
    select_weight_draws,
    stack,
)
from .wolca import (
    LcaEstimates,
    LcaParams,
    PosteriorChain,
    StackedPosterior,
    WolcanConfig,
    WolcanFit,
    adaptive_sampler,
    align_labels,
    assign_classes,
    fit_wolcan,
    fixed_sampler,
    gibbs_step,
    run_chain,
    stack_chains,
    summarize,
    variance_adjust,
)

__version__ = "0.1.0"

__all__ = [
    "BartConfig",
    "LcaEstimates",
    "LcaParams",
    "NonProbabilitySampleData",
    "OutcomeDesign",
    "OutcomePosterior",
    "PosteriorChain",
    "ProbabilitySampleData",
    "PseudoWeightConfig",
    "StackedPosterior",
    "WeightDraws",
    "WolcanConfig",
    "WolcanFit",
    "adaptive_sampler",
    "align_labels",
    "assign_classes",
    "build_design",
    "build_weight_draws",
    "combine_draws",
    "crisp_pseudo_inclusion",
    "estimate_pseudo_weights",
    "fit_continuous_bart",
    "fit_outcome_across_draws",
    "fit_probit_bart",
    "fit_weighted_logit",
    "fit_wolcan",
    "fixed_sampler",
    "gibbs_step",
    "or_table_frame",
    "run_chain",
    "select_weight_draws",
    "stack",
    "stack_chains",
    "summarize",
    "variance_adjust",
    "__version__",
]
