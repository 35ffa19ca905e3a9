//! Triangle-local rigging of splats to a skinned mesh, skinning, and the
//! geometric queries used by collisions.

mod bvh;
mod frame;
mod lbs;

pub use bvh::{ClosestHit, FaceBvh, Feature, MeshBvh, SignedDistance};
pub use frame::{global_to_local, local_to_global, triangle_frame, TriangleFrame, MIN_FACE_AREA};
pub use lbs::{joint_transforms, lbs_pose};

pub(crate) use frame::local_to_global_unchecked;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{SkinnedMesh, SplatFrame, SplatSet, Vec3};

/// Binds every global splat to the face holding its closest surface point
/// and re-expresses it in that face's frame.
pub fn bind_nearest(splats: &SplatSet, mesh: &SkinnedMesh) -> Result<SplatSet> {
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if splats.frame != SplatFrame::Global {
        return Err(Error::invalid("splats", "bind_nearest expects a global set"));
    }
    let tree = FaceBvh::build(&mesh.vertices, &mesh.faces)?;
    let bound = splats
        .splats
        .par_iter()
        .map(|s| {
            let hit = tree.closest(&s.mu);
            let frame = triangle_frame(&mesh.vertices, &mesh.faces, hit.face as usize)?;
            Ok(global_to_local(s, &frame, hit.face))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplatSet::local(bound))
}

/// Frames of every face over `vertices`; degenerate faces yield `None`.
pub fn face_frames(vertices: &[Vec3], faces: &[[u32; 3]]) -> Vec<Option<TriangleFrame>> {
    faces
        .iter()
        .map(|f| {
            TriangleFrame::from_triangle(
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            )
        })
        .collect()
}

/// Places triangle-local splats over posed vertex positions.
pub fn pose_local_splats(local: &SplatSet, vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<SplatSet> {
    let frames = face_frames(vertices, faces);
    let posed = local
        .splats
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let b = s.binding.ok_or(Error::MissingBinding { index })? as usize;
            let frame = frames
                .get(b)
                .ok_or(Error::IndexOutOfRange {
                    what: "splat binding",
                    index: b,
                    len: faces.len(),
                })?
                .as_ref()
                .ok_or(Error::DegenerateFace { face: b })?;
            Ok(local_to_global_unchecked(s, frame))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplatSet::global(posed))
}
