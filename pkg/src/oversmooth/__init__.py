"""Tikhonov regularization with oversmoothing Besov and BV penalties."""
from .core import ExperimentConfig, Grid, PenaltySpec, Signal, SmoothnessSpec, load_config
from .estimators import TikhonovEstimator, TVDenoiser, WaveletShrinkage
from .experiments import run_rate_experiment
from .interpolation import k_functional, smooth_approximation
from .operators import EllipticOperator, IdentityOperator
from .param_choice import apriori_deterministic, apriori_stochastic, discrepancy_search
from .solver import SolverOptions, minimize_tikhonov
from .wavelet import WaveletSpec, analyze, synthesize

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "Grid", "PenaltySpec", "Signal", "SmoothnessSpec", "load_config",
    "TikhonovEstimator", "TVDenoiser", "WaveletShrinkage", "run_rate_experiment",
    "k_functional", "smooth_approximation", "EllipticOperator", "IdentityOperator",
    "apriori_deterministic", "apriori_stochastic", "discrepancy_search",
    "SolverOptions", "minimize_tikhonov", "WaveletSpec", "analyze", "synthesize",
]
