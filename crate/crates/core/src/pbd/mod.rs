//! Position-based dynamics on cage vertices: semi-implicit prediction, XPBD
//! projection of stretch, bending and volume constraints, proxy-based head
//! collision, and finite-difference velocity update.

mod constraints;
mod solver;

pub use constraints::{
    build_constraints, build_tethers, dihedral, enclosed_volume, wrap_angle, BendConstraint, ConstraintSet,
    StretchConstraint, TetherConstraint, VolumeConstraint,
};
pub use solver::{
    collision_penalty, predict, project_constraints, update_velocities, Collider, SolverState, CLEANUP_SWEEPS,
    MIN_PROXY_SELF_WEIGHT,
};
