"""Real-time deterministic MCD (RT-DetMCD) for large, high-throughput data.

Serial estimation lives in :mod:`.estimator`, the block-parallel version in
:mod:`.parallel` and the simulation experiments in :mod:`.simulation`.
"""

from . import errors
from .errors import MCDError
from .estimator import (
    EstimatorConfig,
    OutlierReport,
    ReweightedFit,
    destandardized_fit,
    fit_serial,
    flag,
)
from .parallel import ParallelConfig, choose_q, fit_parallel, kl_deviation
from .simulation import Scenario, kl_metric, run_scenario

__all__ = [
    "EstimatorConfig",
    "MCDError",
    "OutlierReport",
    "ParallelConfig",
    "ReweightedFit",
    "Scenario",
    "choose_q",
    "destandardized_fit",
    "fit_parallel",
    "fit_serial",
    "flag",
    "kl_deviation",
    "kl_metric",
    "run_scenario",
]
