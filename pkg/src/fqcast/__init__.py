"""
Factor-quantile distribution forecasting.

Marginal one-day-ahead distributions come from quantile regressions on
principal components, interpolated into continuous CDFs and coupled with a
copula. Benchmarks (empirical distributions, EGARCH with constant or dynamic
correlation), proper scoring rules and the Model Confidence Set are provided
for evaluation in rolling backtests.
"""

from .backtest import SyntheticSpec, generate_synthetic, run_experiment
from .config import ConfigError, DataError, load_config, normalize
from .copula import CopulaSpec, JointForecast, compose, fit_gaussian_copula, sample_copula
from .distbuild import BaggedMarginal, EmpiricalMarginal, MarginalDistribution, build
from .latentfq import fq_ab_marginals, fq_al_marginals, pca, select_m
from .mcs import MCSConfig, MCSResult, run_mcs
from .qreg import Q9, QuantilePartition, fit_partition, fit_quantile
from .scoring import LossMatrix, energy_score, score_day, variogram_score, wcrps
from .timeseries import IngestError, Panel, load_panel, to_stationary

__version__ = "0.1.0"

__all__ = [
    "BaggedMarginal",
    "ConfigError",
    "CopulaSpec",
    "DataError",
    "EmpiricalMarginal",
    "IngestError",
    "JointForecast",
    "LossMatrix",
    "MCSConfig",
    "MCSResult",
    "MarginalDistribution",
    "Panel",
    "Q9",
    "QuantilePartition",
    "SyntheticSpec",
    "build",
    "compose",
    "energy_score",
    "fit_gaussian_copula",
    "fit_partition",
    "fit_quantile",
    "fq_ab_marginals",
    "fq_al_marginals",
    "generate_synthetic",
    "load_config",
    "load_panel",
    "normalize",
    "pca",
    "run_experiment",
    "run_mcs",
    "sample_copula",
    "score_day",
    "select_m",
    "to_stationary",
    "variogram_score",
    "wcrps",
]
