"""Numerical laboratory for expanding gradient Ricci solitons on multiple
warped products: phase-space shooting, geometric reconstruction and a
verification suite for every proved invariant."""

from .model import (
    AugmentedState,
    ModelConfig,
    PhaseState,
    Quantities,
    augmented_field,
    jacobian,
    quantities,
    validate_config,
    vector_field,
)
from .equilibria import (
    centre_manifold_coeffs,
    e_minus,
    e_plus,
    planar_reduced_field,
    soliton_seed,
    sphere_fixed_linearization,
)
from .integrate import IntegrationControls, Trajectory, integrate, monitor_bounds
from .shoot import ShootingParams, initial_state, solve_einstein, solve_soliton
from .reconstruct import LimitReport, SolitonProfile, asymptotics, origin_limits, profile
from .verify import (
    VerificationReport,
    conservation_check,
    equilibrium_suite,
    hyperbolic_oracle,
    invariant_suite,
    soliton_residual,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedState",
    "IntegrationControls",
    "LimitReport",
    "ModelConfig",
    "PhaseState",
    "Quantities",
    "ShootingParams",
    "SolitonProfile",
    "Trajectory",
    "VerificationReport",
    "asymptotics",
    "augmented_field",
    "centre_manifold_coeffs",
    "conservation_check",
    "e_minus",
    "e_plus",
    "equilibrium_suite",
    "hyperbolic_oracle",
    "initial_state",
    "integrate",
    "invariant_suite",
    "jacobian",
    "monitor_bounds",
    "origin_limits",
    "planar_reduced_field",
    "profile",
    "quantities",
    "solve_einstein",
    "solve_soliton",
    "soliton_residual",
    "soliton_seed",
    "sphere_fixed_linearization",
    "validate_config",
    "vector_field",
]
