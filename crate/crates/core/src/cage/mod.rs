//! Watertight cage construction around a hair splat cloud: voxelization,
//! boundary-surface extraction, enclosure-preserving decimation, and
//! kinematic root marking near the scalp.

mod decimate;
mod roots;
mod surface;
mod voxel;

pub use decimate::{decimate, Decimation};
pub use roots::{mark_roots, RootRig};
pub use surface::{count_components, extract_surface};
pub use voxel::{voxelize, VoxelGrid};

use crate::error::{Error, Result};
use crate::mesh::{bounds, TriMesh};
use crate::mvc::tracked_points;
use crate::types::{SplatSet, Vec3};

/// Default cage vertex budget (strictly under 500).
pub const DEFAULT_TARGET_VERTICES: usize = 499;
/// Default voxel size as a fraction of the hair bounding-box diagonal.
pub const DEFAULT_VOXEL_FRACTION: f32 = 0.02;
pub const DEFAULT_DILATION: u32 = 2;

/// Point on a scalp face that prescribes a kinematic cage vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootAnchor {
    pub face: u32,
    pub bary: [f32; 3],
}

/// Simulation cage: rest geometry plus per-vertex dynamics attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Cage {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// `β_j = 1/m_j`; zero marks a kinematic vertex.
    pub inv_mass: Vec<f32>,
    pub velocities: Vec<Vec3>,
    pub root_anchor: Vec<Option<RootAnchor>>,
}

impl Cage {
    /// All vertices free with unit mass and at rest.
    pub fn from_mesh(mesh: TriMesh) -> Self {
        let n = mesh.vertices.len();
        Self {
            vertices: mesh.vertices,
            faces: mesh.faces,
            inv_mass: vec![1.0; n],
            velocities: vec![Vec3::zeros(); n],
            root_anchor: vec![None; n],
        }
    }

    pub fn mesh(&self) -> TriMesh {
        TriMesh::new(self.vertices.clone(), self.faces.clone())
    }

    pub fn kinematic_count(&self) -> usize {
        self.inv_mass.iter().filter(|&&b| b == 0.0).count()
    }

    pub fn free_count(&self) -> usize {
        self.vertices.len() - self.kinematic_count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (what, len) in [
            ("inv_mass", self.inv_mass.len()),
            ("velocities", self.velocities.len()),
            ("root_anchor", self.root_anchor.len()),
        ] {
            if len != n {
                return Err(Error::CountMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        self.mesh().check_watertight()?;
        for (j, (&b, a)) in self.inv_mass.iter().zip(&self.root_anchor).enumerate() {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::invalid("inv_mass", format!("vertex {j} has {b}")));
            }
            if b == 0.0 && a.is_none() {
                return Err(Error::invalid(
                    "root_anchor",
                    format!("kinematic vertex {j} has no anchor"),
                ));
            }
        }
        Ok(())
    }
}

/// Parameters of [`build_cage`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CageOptions {
    /// Voxel edge in meters; `None` uses [`DEFAULT_VOXEL_FRACTION`] of the
    /// tracked-point bounding-box diagonal.
    pub voxel_size: Option<f32>,
    pub dilation: u32,
    pub target_vertices: usize,
    /// Extra dilation steps tried when the occupancy is disconnected.
    pub max_extra_dilation: u32,
}

impl Default for CageOptions {
    fn default() -> Self {
        Self {
            voxel_size: None,
            dilation: DEFAULT_DILATION,
            target_vertices: DEFAULT_TARGET_VERTICES,
            max_extra_dilation: 4,
        }
    }
}

/// What [`build_cage`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct CageReport {
    pub voxel_size: f32,
    pub dilation: u32,
    pub occupied_voxels: usize,
    pub surface_vertices: usize,
    pub cage_vertices: usize,
    pub warning: Option<String>,
}

/// Voxelizes all seven tracked points of every splat, extracts the voxel
/// boundary and decimates it outward-only. The cage has unit masses and no
/// roots; see [`mark_roots`].
pub fn build_cage(hair: &SplatSet, options: &CageOptions) -> Result<(Cage, CageReport)> {
    if hair.is_empty() {
        return Err(Error::EmptyInput("hair set"));
    }
    let points = tracked_points(hair);
    let voxel_size = match options.voxel_size {
        Some(v) => v,
        None => {
            let (lo, hi) = bounds(&points);
            DEFAULT_VOXEL_FRACTION * (hi - lo).norm()
        }
    };
    let mut dilation = options.dilation;
    let (grid, surface) = loop {
        let grid = voxelize(&points, voxel_size, dilation)?;
        match extract_surface(&grid) {
            Ok(s) => break (grid, s),
            Err(Error::DisconnectedOccupancy { .. }) if dilation < options.dilation + options.max_extra_dilation => {
                dilation += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let d = decimate(&surface, options.target_vertices)?;
    let report = CageReport {
        voxel_size,
        dilation,
        occupied_voxels: grid.count(),
        surface_vertices: surface.vertices.len(),
        cage_vertices: d.mesh.vertices.len(),
        warning: d.warning,
    };
    Ok((Cage::from_mesh(d.mesh), report))
}
