"""Pseudo-spectral laboratory for near-equilibrium 2D compressible flows.

The package is organised in six modules:

``spectral``
    Periodic grid, Fourier transforms, derivatives, Leray decomposition
    and norm quadrature.
``profiles``
    Closed-form vortex and dipole asymptotic profiles, Biot-Savart
    reconstruction and vorticity moments.
``kernels``
    Exact Fourier-side Green kernels of the linearised system, the
    artificial-viscosity approximation, frequency splitting and
    pointwise-bound verification.
``solver``
    Exponential time-differencing integrator for the nonlinear system
    near equilibrium, plus an incompressible vorticity control solver.
``harness``
    Decay-rate experiments producing machine-readable reports.
``cli``
    Command-line experiment runner.
"""

from .spectral import Grid, SpectralField, State, make_grid, transform
from .profiles import FluidParams, Moments, PowerPressureLaw, default_params
from .solver import SolverConfig, Trajectory, simulate
from .harness import ExperimentContext, list_experiments, run_experiment

__all__ = [
    "Grid",
    "SpectralField",
    "State",
    "make_grid",
    "transform",
    "FluidParams",
    "Moments",
    "PowerPressureLaw",
    "default_params",
    "SolverConfig",
    "Trajectory",
    "simulate",
    "ExperimentContext",
    "list_experiments",
    "run_experiment",
]

__version__ = "0.1.0"
