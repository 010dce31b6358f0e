"""Rotating vortex-patch equilibria (V-states) of the quasi-geostrophic
shallow-water equations: boundary-integral solver, branch continuation and
the closed-form results that anchor them."""

from .analytic import Q4, dispersion_set, kirchhoff_boundary, love_point, omega_m, split_coefficients
from .contour import BoundaryCurve, Diagnostics, circle
from .continuation import Branch, ContinuationConfig, jump_epsilon, seed_from_bifurcation, trace_branch
from .equilibrium import EquilibriumState, FixedJ, FixedOmega, SolverConfig, solve_state
from .field import FieldContext

__version__ = "0.1.0"

__all__ = [
    "Q4",
    "BoundaryCurve",
    "Branch",
    "ContinuationConfig",
    "Diagnostics",
    "EquilibriumState",
    "FieldContext",
    "FixedJ",
    "FixedOmega",
    "SolverConfig",
    "circle",
    "dispersion_set",
    "jump_epsilon",
    "kirchhoff_boundary",
    "love_point",
    "omega_m",
    "seed_from_bifurcation",
    "solve_state",
    "split_coefficients",
    "trace_branch",
]
