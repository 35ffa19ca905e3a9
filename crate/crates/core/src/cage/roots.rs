use crate::error::{Error, Result};
use crate::rig::{FaceBvh, TriangleFrame};
use crate::types::{SkinnedMesh, Vec3};

use super::{Cage, RootAnchor};

/// Marks cage vertices within `radius` of the scalp as kinematic roots
/// anchored to their closest scalp point; all other vertices get unit mass.
pub fn mark_roots(cage: &Cage, mesh: &SkinnedMesh, radius: f32) -> Result<Cage> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let scalp = mesh.scalp_faces.as_deref().unwrap_or(&[]);
    if scalp.is_empty() {
        return Err(Error::NoScalpFaces);
    }
    let tree = FaceBvh::build_subset(&mesh.vertices, &mesh.faces, scalp)?;
    let mut out = cage.clone();
    let mut roots = 0;
    for (j, v) in cage.vertices.iter().enumerate() {
        let hit = tree.closest(v);
        if hit.distance <= radius {
            out.inv_mass[j] = 0.0;
            out.root_anchor[j] = Some(RootAnchor {
                face: hit.face,
                bary: hit.bary,
            });
            roots += 1;
        } else {
            out.inv_mass[j] = 1.0;
            out.root_anchor[j] = None;
        }
    }
    if roots == 0 {
        return Err(Error::NoRootsFound);
    }
    Ok(out)
}

/// Drives kinematic cage vertices from the posed scalp.
///
/// Each root keeps its rest offset from its anchor point expressed in the
/// anchor face's frame, so a root slightly off the scalp follows the face's
/// rotation and scale; at the rest pose targets equal rest positions.
#[derive(Debug, Clone)]
pub struct RootRig {
    entries: Vec<RootEntry>,
}

#[derive(Debug, Clone, Copy)]
struct RootEntry {
    vertex: u32,
    anchor: RootAnchor,
    offset: Vec3,
}

fn anchor_point(vertices: &[Vec3], face: &[u32; 3], bary: &[f32; 3]) -> Vec3 {
    vertices[face[0] as usize] * bary[0] + vertices[face[1] as usize] * bary[1] + vertices[face[2] as usize] * bary[2]
}

fn face_frame(vertices: &[Vec3], face: &[u32; 3], index: u32) -> Result<TriangleFrame> {
    let [a, b, c] = face.map(|i| vertices[i as usize]);
    TriangleFrame::from_triangle(a, b, c).ok_or(Error::DegenerateFace { face: index as usize })
}

impl RootRig {
    pub fn new(cage: &Cage, rest_vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Self> {
        let mut entries = Vec::new();
        for (j, anchor) in cage.root_anchor.iter().enumerate() {
            if cage.inv_mass[j] != 0.0 {
                continue;
            }
            let anchor =
                anchor.ok_or_else(|| Error::invalid("root_anchor", format!("kinematic vertex {j} has no anchor")))?;
            let face = faces.get(anchor.face as usize).ok_or(Error::IndexOutOfRange {
                what: "root anchor face",
                index: anchor.face as usize,
                len: faces.len(),
            })?;
            let frame = face_frame(rest_vertices, face, anchor.face)?;
            let base = anchor_point(rest_vertices, face, &anchor.bary);
            entries.push(RootEntry {
                vertex: j as u32,
                anchor,
                offset: frame.rotation.tr_mul(&(cage.vertices[j] - base)) / frame.eta,
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.vertex as usize)
    }

    /// Writes the target of every root into `out` (indexed by cage vertex);
    /// other entries are left untouched.
    pub fn targets(&self, posed: &[Vec3], faces: &[[u32; 3]], out: &mut [Vec3]) -> Result<()> {
        for e in &self.entries {
            let face = &faces[e.anchor.face as usize];
            let frame = face_frame(posed, face, e.anchor.face)?;
            let base = anchor_point(posed, face, &e.anchor.bary);
            out[e.vertex as usize] = base + frame.rotation * e.offset * frame.eta;
        }
        Ok(())
    }
}
