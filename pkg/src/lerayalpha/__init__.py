"""Leray-alpha Navier-Stokes in a periodic channel with Navier slip walls."""
__version__ = "0.1.0"

from .boundary import NoSlipParams, ParameterDomainError, SlipParams, ghost_fill, robin_residual, slip_length
from .diagnostics import EnergyLedger, LedgerRecorder, TestFunction, Trajectory, global_energy_residual
from .filter import FilterParams, FilterSolution, HelmholtzStokesFilter, solve_filter
from .mesh import GridSpec, ScalarField, VelocityField
from .stepper import Forcing, LerayAlphaSolver, SimState, StepperConfig, step

__all__ = [
    "EnergyLedger", "FilterParams", "FilterSolution", "Forcing", "GridSpec", "HelmholtzStokesFilter",
    "LedgerRecorder", "LerayAlphaSolver", "NoSlipParams", "ParameterDomainError", "ScalarField",
    "SimState", "SlipParams", "StepperConfig", "TestFunction", "Trajectory", "VelocityField",
    "ghost_fill", "global_energy_residual", "robin_residual", "slip_length", "solve_filter", "step",
]
