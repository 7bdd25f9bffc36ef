"""Robust moment-based fitting of exponential and Pareto I loss severity models.

Three estimators are provided next to the MLE benchmark, each matching a
different window statistic of a completely observed sample: the truncated
(MTuM), interval-censored (MCM), and payment-type, left-truncated
right-censored (MTCM) moment methods.  The package also ships the general
k-equation truncated-moment machinery, closed-form asymptotic variances and
relative efficiencies, influence functions, and a deterministic Monte Carlo
engine for finite-sample studies.
"""

from .dist import (
    ExponentialModel,
    ParetoIModel,
    RandomSource,
    ThresholdPair,
    sample,
)
from .errors import (
    ConfigError,
    DegenerateError,
    EmptyWindowError,
    NoSolutionError,
    QuadratureError,
    SeverfitError,
    SolverStallError,
)
from .estimators import EstimateResult, SampleMoments, fit, read_loss_csv
from .framework import DistributionAdapter, MomentEquation, TruncatedSpec, adapter_from_model
from .asymptotics import AREReport, IFCurve, are, are_table, are_table_csv, avar
from .mc import HistogramPanel, SimCell, SimConfig, SimReport, run_cell, run_table

__version__ = "0.1.0"

__all__ = [
    "ExponentialModel",
    "ParetoIModel",
    "RandomSource",
    "ThresholdPair",
    "sample",
    "SeverfitError",
    "EmptyWindowError",
    "NoSolutionError",
    "SolverStallError",
    "QuadratureError",
    "DegenerateError",
    "ConfigError",
    "EstimateResult",
    "SampleMoments",
    "fit",
    "read_loss_csv",
    "DistributionAdapter",
    "MomentEquation",
    "TruncatedSpec",
    "adapter_from_model",
    "AREReport",
    "IFCurve",
    "are",
    "are_table",
    "are_table_csv",
    "avar",
    "SimCell",
    "SimConfig",
    "SimReport",
    "HistogramPanel",
    "run_cell",
    "run_table",
    "__version__",
]
