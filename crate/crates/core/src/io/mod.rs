//! File formats: splat PLY, mesh and cage OBJ with JSON sidecars, motion
//! JSON, the weight cache, and settings files. Errors name the offending
//! path.

mod config;
mod mesh;
mod motion;
mod ply;
mod weights;

pub use config::{parse_vec3, Settings, DEFAULT_BOUNDARY_RADIUS, DEFAULT_ROOT_RADIUS};
pub use mesh::{
    format_obj, parse_obj, read_cage, read_obj, read_skinned_mesh, sidecar_path, write_cage, write_obj,
    write_skinned_mesh,
};
pub use motion::{format_motion, parse_motion, read_motion, write_motion};
pub use ply::{logit, read_splats, rgb_to_sh, sh_to_rgb, sigmoid, write_splats, write_splats_to, SH_C0};
pub use weights::{read_weights, read_weights_from, write_weights, write_weights_to, WEIGHTS_MAGIC, WEIGHTS_VERSION};
