"""Transient electromagnetic simulation of parallel-wound no-insulation HTS pancake coils.

Thin-strip T-formulation per tape, analytic axisymmetric field kernels and a
potential-chain bookkeeping of the radial contact currents, solved as one
implicit system per time step.
"""

from .coil import CoilSpec, JointResistances, MaterialParams, SpecError, build_mesh, validate_spec
from .config import ConfigError, RunConfig, load_config, parse_config
from .multiscale import MultiscaleConfig
from .scenario import BackgroundField, ClosedLoopConfig, DriveProfile
from .solver import PcrtaModel, Scenario, SimState, SolverConfig, TimeSeriesRecord, run

__version__ = "0.1.0"

__all__ = [
    "BackgroundField", "ClosedLoopConfig", "CoilSpec", "ConfigError", "DriveProfile",
    "JointResistances", "MaterialParams", "MultiscaleConfig", "PcrtaModel", "RunConfig",
    "Scenario", "SimState", "SolverConfig", "SpecError", "TimeSeriesRecord", "build_mesh",
    "load_config", "parse_config", "run", "validate_spec",
]
