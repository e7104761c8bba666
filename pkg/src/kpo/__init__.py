"""Steady-state output of a driven Kerr parametric oscillator.

Truncated-Fock algebra and Wigner functions (:mod:`kpo.fock`), Lindblad
dynamics and steady states (:mod:`kpo.dynamics`), closed-form Gaussian
results for the pure parametric oscillator (:mod:`kpo.gaussian`), cascaded
temporal-mode extraction (:mod:`kpo.pulses`), nonclassicality metrics
(:mod:`kpo.metrics`) and the sweep/optimization harness (:mod:`kpo.harness`).
"""

from . import dynamics, errors, fock, gaussian, harness, metrics, pulses
from .dynamics import (
    LindbladModel,
    SystemParams,
    choose_cavity_dim,
    evolve,
    kpo_steady_state,
    steady_state,
    two_time_correlator,
)
from .errors import KpoError
from .fock import QuadratureGrid, WignerField, wigner
from .gaussian import (
    CovarianceMatrix,
    covariance_to_fock,
    po_cavity_covariance,
    po_output_covariance_boxcar,
)
from .harness import (
    FilterSpec,
    OptimizerConfig,
    SweepConfig,
    optimize_filter,
    reproduce,
    run_sweep,
)
from .metrics import MetricsRecord, klyshko, metrics_of, poisson_predictors, squeezing_s, wln
from .pulses import (
    FilterFunction,
    TimeGrid,
    boxcar_filter,
    cascaded_model,
    extraction_coupling,
    gaussian_filter,
    output_mode_state,
)

__version__ = "0.1.0"

__all__ = [
    "dynamics", "errors", "fock", "gaussian", "harness", "metrics", "pulses",
    "LindbladModel", "SystemParams", "choose_cavity_dim", "evolve",
    "kpo_steady_state", "steady_state", "two_time_correlator",
    "KpoError",
    "QuadratureGrid", "WignerField", "wigner",
    "CovarianceMatrix", "covariance_to_fock", "po_cavity_covariance",
    "po_output_covariance_boxcar",
    "FilterSpec", "OptimizerConfig", "SweepConfig", "optimize_filter",
    "reproduce", "run_sweep",
    "MetricsRecord", "klyshko", "metrics_of", "poisson_predictors",
    "squeezing_s", "wln",
    "FilterFunction", "TimeGrid", "boxcar_filter", "cascaded_model",
    "extraction_coupling", "gaussian_filter", "output_mode_state",
    "__version__",
]
