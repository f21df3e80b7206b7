"""Finite-volume solver for charged solutes in a porous medium.

Electrostatics (mixed Gauss law), Darcy flow driven by the Coulomb force
and Nernst-Planck transport with reactions, coupled per time step by a
fixed-point iteration.
"""
from .coupling import (FixedPointConfig, Problem, SolverSettings, StepInfo, SystemState,
                       Trajectory, advance, fixed_point_step, initial_state, run,
                       uniqueness_probe)
from .darcy import DarcySolution, electric_body_force, solve_darcy
from .diagnostics import (DiagnosticsRecord, drift_sign_term, entropy_total, gronwall_constants,
                          gronwall_envelopes, lyapunov)
from .errors import (CompatibilityViolation, ConfigError, DPNPError, NegativeConcentration,
                     NonConvergence, OuterNonConvergence)
from .grid import Grid2D
from .model import (BoundaryData, MassActionReaction, ModelParams, ReactionSpec, charge_density,
                    evaluate_reactions, validate)
from .oracle import manufactured_errors, monolithic_step
from .poisson import PoissonSolution, solve_gauss
from .transport import step_species

__version__ = "0.1.0"
