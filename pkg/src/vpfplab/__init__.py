"""Vlasov-Poisson-Fokker-Planck to ionic Euler-Poisson limit laboratory."""
from . import kernels
from .core import (
    Distribution,
    MacroState,
    SimConfig,
    SpatialGrid,
    VelocityGrid,
    maxwellian,
    moments,
)
from .errors import *  # noqa: F401,F403
from .fluid import FluidState, electron_velocity, fluid_step, run_fluid
from .kinetic import KineticState, run_kinetic, step_collision, vpfp_step
from .metrics import AugmentedState, modulated_energy
from .poisson_boltzmann import Potential, solve_pb
from .study import StudyConfig, convergence_study, rate_fit, well_prepared_ic

__version__ = "0.1.0"
