"""Two-team zero-sum multitime differential games.

Multitime ``t`` ranges over a box in R^m_+ with the product order; states
follow an m-flow ``dx/dt^a = X_a(t, x, u_a, v_a)`` and the payoff is the work
of a running-cost 1-form along an increasing curve plus a terminal cost.
"""

from .dynamics import (ControlSignal, IntegrationError, Trajectory, curvilinear_integral,
                       flow_cell, integrate_flow, payoff)
from .expr import ExprError, FieldExpr, register_primitive
from .gamespec import (Bounds, BoundsReport, ControlSet, GameSpec, SpecError, check_cic,
                       check_closedness, halton, load_spec, parse_spec, validate_bounds)
from .hamiltonian import (HamiltonianForm, crosscheck_value_vs_hj, eval_lower, eval_upper,
                          hj_march, hjiu_residual, isaacs_gap, pde_residual)
from .lattice import (IncreasingPath, Lattice, LatticeError, MultitimeBox, StateGrid, canonical_path,
                      enumerate_staircases, path_length, reversed_image, suborder_points)
from .representation import (AffineRepresentation, HomogeneousRepresentation, build_affine_rep,
                             build_homogeneous_rep, certify_representation, value_representation)
from .values import (BudgetError, DiscreteStrategy, ValueGrid, brute_force_value, check_value_bounds,
                     dpp_consistency, dpp_step, solve_values)

__all__ = [
    "ControlSignal",
    "IntegrationError",
    "Trajectory",
    "curvilinear_integral",
    "flow_cell",
    "integrate_flow",
    "payoff",
    "ExprError",
    "FieldExpr",
    "register_primitive",
    "Bounds",
    "BoundsReport",
    "ControlSet",
    "GameSpec",
    "SpecError",
    "check_cic",
    "check_closedness",
    "halton",
    "load_spec",
    "parse_spec",
    "validate_bounds",
    "HamiltonianForm",
    "crosscheck_value_vs_hj",
    "eval_lower",
    "eval_upper",
    "hj_march",
    "hjiu_residual",
    "isaacs_gap",
    "pde_residual",
    "IncreasingPath",
    "Lattice",
    "LatticeError",
    "MultitimeBox",
    "StateGrid",
    "canonical_path",
    "enumerate_staircases",
    "path_length",
    "reversed_image",
    "suborder_points",
    "AffineRepresentation",
    "HomogeneousRepresentation",
    "build_affine_rep",
    "build_homogeneous_rep",
    "certify_representation",
    "value_representation",
    "BudgetError",
    "DiscreteStrategy",
    "ValueGrid",
    "brute_force_value",
    "check_value_bounds",
    "dpp_consistency",
    "dpp_step",
    "solve_values",
]

__version__ = "0.1.0"
