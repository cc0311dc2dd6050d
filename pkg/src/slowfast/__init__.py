"""Numerics for singularly perturbed systems with singular impulses.

Fast variables ``z`` evolve on the scale ``t / mu`` and receive jumps of
size ``I / mu`` at fixed moments; slow variables ``y`` evolve on the scale
``t``. The package integrates such systems, solves the degenerate
``mu = 0`` problem, and measures how the two approach each other.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .expr import compile_scalar, compile_vector, eval_expr, parse_expr, to_text
from .model import EventKind, InitialState, RegionSpec, SystemModel, moments_in_order, validate_system
from .integrator import (SimulationParams, Trajectory, integrate_full, integrate_rescaled,
                         rescaling_equivalence_check)
from .reduced import (ReducedTrajectory, RootMap, check_degenerate_impulse, check_root_continuity,
                      integrate_reduced, solve_root)
from .analysis import (Limit, LyapunovSpec, attraction_check, check_conditions, convergence_study,
                       detect_layers, impulse_limit, layer_scaling, lyapunov_check, report_to_json)
from .specfile import SpecDocument, bundled_spec_path, load_spec, parse_spec

__all__ = [
    "parse_expr", "eval_expr", "to_text", "compile_vector", "compile_scalar",
    "SystemModel", "RegionSpec", "InitialState", "EventKind", "validate_system", "moments_in_order",
    "SimulationParams", "Trajectory", "integrate_full", "integrate_rescaled",
    "rescaling_equivalence_check",
    "RootMap", "ReducedTrajectory", "solve_root", "integrate_reduced",
    "check_degenerate_impulse", "check_root_continuity",
    "Limit", "LyapunovSpec", "lyapunov_check", "impulse_limit", "attraction_check",
    "convergence_study", "detect_layers", "layer_scaling", "check_conditions", "report_to_json",
    "SpecDocument", "load_spec", "parse_spec", "bundled_spec_path",
]
