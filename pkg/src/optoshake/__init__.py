"""Linearized cavity optomechanics with a frequency-modulated cavity.

Covariance dynamics, Bessel-sideband reduction, stability tests and the
phonon-number and entanglement observables.
"""
from .dynamics import (DivergenceError, SimulationTrace, StepPolicy, build_diffusion, build_drift,
                       initial_covariance, integrate_covariance, lyapunov_steady)
from .meanfield import MeanFieldState, integrate_mean_fields, steady_mean_fields
from .model import (REFERENCE, ModulationParams, ParameterError, PhysicalParams, ReducedParams, reduce,
                    thermal_occupation)
from .observables import log_negativity, period_average, phonon_number, transient_cutoff
from .sidebands import bessel_j, rwa_reduce, sideband_table
from .stability import (StabilityVerdict, Verdict, divergence_probe, floquet_multipliers,
                        routh_hurwitz, stability_map, static_threshold)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError", "SimulationTrace", "StepPolicy", "build_diffusion", "build_drift",
    "initial_covariance", "integrate_covariance", "lyapunov_steady", "MeanFieldState",
    "integrate_mean_fields", "steady_mean_fields", "REFERENCE", "ModulationParams", "ParameterError",
    "PhysicalParams", "ReducedParams", "reduce", "thermal_occupation", "log_negativity",
    "period_average", "phonon_number", "transient_cutoff", "bessel_j", "rwa_reduce",
    "sideband_table", "StabilityVerdict", "Verdict", "divergence_probe", "floquet_multipliers",
    "routh_hurwitz", "stability_map", "static_threshold", "__version__",
]
