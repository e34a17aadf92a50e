"""Sum-of-trees Bayesian regression engine."""
from .model import BartConfig, BartPosterior, fit_continuous_bart, fit_probit_bart, predict

__all__ = [
    "BartConfig",
    "BartPosterior",
    "fit_continuous_bart",
    "fit_probit_bart",
    "predict",
]
