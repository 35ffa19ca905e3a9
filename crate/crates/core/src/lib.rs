//! Cage-driven position-based dynamics for Gaussian-splat hair.
//!
//! Hair splats are embedded in a coarse watertight cage through mean value
//! coordinates. Each frame the head mesh is posed by linear blend skinning,
//! scalp-anchored cage vertices follow it kinematically, the remaining cage
//! vertices are simulated with XPBD (stretch, bending, proxy collision
//! against the head), and the hair is rebuilt from the deformed cage by
//! principal-axis reconstruction. Bald-head splats ride the mesh in
//! triangle-local frames.

pub mod cage;
pub mod decomposition;
pub mod deform;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod mesh;
pub mod mvc;
pub mod pbd;
pub mod rig;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
