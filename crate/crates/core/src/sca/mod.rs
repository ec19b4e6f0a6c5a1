//! Successive convex approximation for the relaxed association and power
//! problem. Each iteration replaces the nonconvex SE, interference and
//! fronthaul constraints by convex bounds that are tight at the current point
//! and solves the result with the interior-point solver in [`crate::ipm`].

mod solver;
mod subproblem;
mod surrogate;

pub use solver::{
    initial_association, initial_iterate, integrality_gap, iterate_from_power, sca_solve,
    solve_subproblem, ScaInit, ScaParams,
};
pub use subproblem::{
    convexified_constraints, convexified_with_fixed_assoc, lower_bound_at, se_with_interference,
    ConvexSubproblem, ScaIterate, VarMap,
};
pub use surrogate::{
    assoc_penalty, assoc_penalty_majorant, bilinear_majorant, interference_minorant, se_tilde,
    surrogate_se_lower, surrogate_se_upper,
};
