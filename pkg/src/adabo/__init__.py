"""Adaptive Bayesian optimization with Gaussian-process model selection.

Submodules
----------
kernels, gpr, model_quality
    Covariance kernels, GP regression with maximum-likelihood fitting and
    held-out scoring.
gpi
    Kernel and restricted-domain selection by breadth-first search.
acquisition, selection, optimizer
    Acquisition functions, candidate selection and the outer BO loops.
sampling, sensitivity
    Sobol' sequences, Saltelli designs and Sobol' sensitivity indices.
bench, report, cli
    Synthetic benchmarks, WCRI tables and the command-line front end.
"""

from .acquisition import AcquisitionKind, AcquisitionTag, acq_eval, acq_maximize, log_h
from .bench import RunEnsemble, SyntheticObjective, quartile_curves, run_ensemble
from .gpi import GpiConfig, GpiResult, gpi_search, split_train_test
from .gpr import Doe, Rpd, fit_mle, posterior, predict
from .kernels import KernelFamily, KernelParams, KernelSpec
from .model_quality import QualityScore, relmse, score, tll
from .optimizer import OptimizerConfig, RunHistory, Variant, recommend, run, run_adaptive_bo, run_bo
from .report import WcriReport, emit_table, wcri
from .sampling import saltelli_design, sobol_points
from .selection import CatState, EsSchedule, SelectionStrategy, exploitation_score, mmd
from .sensitivity import SensitivityReport, bootstrap_ci, sobol_indices

__all__ = [
    "AcquisitionKind",
    "AcquisitionTag",
    "acq_eval",
    "acq_maximize",
    "log_h",
    "RunEnsemble",
    "SyntheticObjective",
    "quartile_curves",
    "run_ensemble",
    "GpiConfig",
    "GpiResult",
    "gpi_search",
    "split_train_test",
    "Doe",
    "Rpd",
    "fit_mle",
    "posterior",
    "predict",
    "KernelFamily",
    "KernelParams",
    "KernelSpec",
    "QualityScore",
    "relmse",
    "score",
    "tll",
    "OptimizerConfig",
    "RunHistory",
    "Variant",
    "recommend",
    "run",
    "run_adaptive_bo",
    "run_bo",
    "WcriReport",
    "emit_table",
    "wcri",
    "saltelli_design",
    "sobol_points",
    "CatState",
    "EsSchedule",
    "SelectionStrategy",
    "exploitation_score",
    "mmd",
    "SensitivityReport",
    "bootstrap_ci",
    "sobol_indices",
]

__version__ = "0.1.0"
