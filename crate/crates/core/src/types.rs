//! Shared domain types: splats, skinned meshes, motion frames and solver
//! settings.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Quaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f32>;
pub type Mat3 = Matrix3<f32>;
pub type Mat4 = Matrix4<f32>;
/// Rotation quaternion, constructed as `Quat::new(w, x, y, z)`.
pub type Quat = Quaternion<f32>;

pub const UNIT_QUAT_TOL: f32 = 1e-6;
/// Inputs further than this from unit norm are rejected instead of normalized.
pub const QUAT_NORMALIZE_TOL: f32 = 1e-3;

/// One Gaussian primitive.
///
/// `scale` holds per-axis standard deviations in meters (linear, not log).
/// A splat with a `binding` lives in the local frame of that mesh triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSplat {
    pub mu: Vec3,
    pub rot: Quat,
    pub scale: Vec3,
    pub opacity: f32,
    pub color: Vec3,
    pub feature: Option<[f32; 2]>,
    pub binding: Option<u32>,
}

impl GaussianSplat {
    pub fn new(mu: Vec3, rot: Quat, scale: Vec3, opacity: f32, color: Vec3) -> Self {
        Self {
            mu,
            rot,
            scale,
            opacity,
            color,
            feature: None,
            binding: None,
        }
    }

    pub fn is_local(&self) -> bool {
        self.binding.is_some()
    }
}

impl Default for GaussianSplat {
    fn default() -> Self {
        Self::new(Vec3::zeros(), Quat::identity(), Vec3::repeat(1.0), 1.0, Vec3::zeros())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatFrame {
    Global,
    TriangleLocal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatSet {
    pub splats: Vec<GaussianSplat>,
    pub frame: SplatFrame,
}

impl SplatSet {
    pub fn global(splats: Vec<GaussianSplat>) -> Self {
        Self {
            splats,
            frame: SplatFrame::Global,
        }
    }

    pub fn local(splats: Vec<GaussianSplat>) -> Self {
        Self {
            splats,
            frame: SplatFrame::TriangleLocal,
        }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.splats.iter().map(|s| s.mu).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonFinite,
    NonUnitQuaternion,
    NonPositiveScale,
    OpacityOutOfRange,
    ColorOutOfRange,
    /// Binding present in a global set, or absent in a local one.
    FrameMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::NonFinite => "non-finite value",
            ViolationKind::NonUnitQuaternion => "non-unit quaternion",
            ViolationKind::NonPositiveScale => "non-positive scale",
            ViolationKind::OpacityOutOfRange => "opacity out of range",
            ViolationKind::ColorOutOfRange => "color out of range",
            ViolationKind::FrameMismatch => "binding does not match set frame",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "splat {}: {}", self.index, self.kind)
    }
}

/// Checks every splat invariant and reports each violation; never fails.
pub fn validate_splat_set(set: &SplatSet) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, s) in set.splats.iter().enumerate() {
        let mut push = |kind| out.push(Violation { index, kind });
        let finite = s.mu.iter().all(|v| v.is_finite())
            && s.scale.iter().all(|v| v.is_finite())
            && s.color.iter().all(|v| v.is_finite())
            && s.rot.coords.iter().all(|v| v.is_finite())
            && s.opacity.is_finite();
        if !finite {
            push(ViolationKind::NonFinite);
            continue;
        }
        if (s.rot.norm() - 1.0).abs() > UNIT_QUAT_TOL {
            push(ViolationKind::NonUnitQuaternion);
        }
        if s.scale.iter().any(|&v| v <= 0.0) {
            push(ViolationKind::NonPositiveScale);
        }
        if !(0.0..=1.0).contains(&s.opacity) {
            push(ViolationKind::OpacityOutOfRange);
        }
        if s.color.iter().any(|v| !(0.0..=1.0).contains(v)) {
            push(ViolationKind::ColorOutOfRange);
        }
        let expect_binding = set.frame == SplatFrame::TriangleLocal;
        if s.binding.is_some() != expect_binding {
            push(ViolationKind::FrameMismatch);
        }
    }
    out
}

/// Rotation matrix of a unit quaternion.
///
/// Inputs within [`QUAT_NORMALIZE_TOL`] of unit norm are normalized first.
pub fn quat_to_matrix(q: &Quat) -> Result<Mat3> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORMALIZE_TOL {
        return Err(Error::NonUnitQuaternion { norm });
    }
    let q = q / norm;
    Ok(quat_to_matrix_unchecked(&q))
}

#[inline]
pub(crate) fn quat_to_matrix_unchecked(q: &Quat) -> Mat3 {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Mat3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// Unit quaternion of a rotation matrix, with `w >= 0`.
pub fn matrix_to_quat(m: &Mat3) -> Quat {
    // Shepperd: branch on the largest diagonal term for stability.
    let m = m.cast::<f64>();
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let q = nalgebra::Quaternion::new(w, x, y, z).normalize();
    let q = if q.w < 0.0 { -q } else { q };
    q.cast::<f32>()
}

/// Max absolute entry of `RᵀR − I`, plus the determinant.
pub fn orthonormality(r: &Mat3) -> (f32, f32) {
    let dev = (r.transpose() * r - Mat3::identity()).abs().max();
    (dev, r.determinant())
}

/// Triangle mesh driven by linear blend skinning.
///
/// Faces wind counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinnedMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub joints: Vec<String>,
    /// Sparse `(joint, weight)` pairs per vertex, summing to one.
    pub skin_weights: Vec<Vec<(u32, f32)>>,
    pub scalp_faces: Option<Vec<u32>>,
}

pub const SKIN_WEIGHT_TOL: f32 = 1e-6;

impl SkinnedMesh {
    /// Single-joint mesh with every vertex fully bound to `joint`.
    pub fn rigid(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, joint: &str) -> Self {
        let n = vertices.len();
        Self {
            vertices,
            faces,
            joints: vec![joint.to_string()],
            skin_weights: vec![vec![(0, 1.0)]; n],
            scalp_faces: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let nv = self.vertices.len();
        for f in &self.faces {
            for &i in f {
                if i as usize >= nv {
                    return Err(Error::IndexOutOfRange {
                        what: "face vertex",
                        index: i as usize,
                        len: nv,
                    });
                }
            }
        }
        if self.skin_weights.len() != nv {
            return Err(Error::CountMismatch {
                what: "skin weight rows",
                expected: nv,
                got: self.skin_weights.len(),
            });
        }
        for (vertex, row) in self.skin_weights.iter().enumerate() {
            let mut sum = 0.0f64;
            for &(j, w) in row {
                if j as usize >= self.joints.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "skin joint",
                        index: j as usize,
                        len: self.joints.len(),
                    });
                }
                sum += w as f64;
            }
            if (sum - 1.0).abs() > SKIN_WEIGHT_TOL as f64 {
                return Err(Error::BadSkinWeights {
                    vertex,
                    sum: sum as f32,
                });
            }
        }
        if let Some(scalp) = &self.scalp_faces {
            for &f in scalp {
                if f as usize >= self.faces.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "scalp face",
                        index: f as usize,
                        len: self.faces.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One timestep of driving signal.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionFrame {
    /// Rigid world transform per joint name.
    Joints(BTreeMap<String, Mat4>),
    /// Full replacement of the posed mesh vertices.
    Vertices(Vec<Vec3>),
}

pub const JOINT_ORTHO_TOL: f32 = 1e-5;

impl MotionFrame {
    pub fn identity(joints: &[String]) -> Self {
        MotionFrame::Joints(joints.iter().map(|j| (j.clone(), Mat4::identity())).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if let MotionFrame::Joints(map) = self {
            for m in map.values() {
                let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
                let (deviation, det) = orthonormality(&r);
                if deviation > JOINT_ORTHO_TOL || det <= 0.0 {
                    return Err(Error::NonOrthonormal { deviation });
                }
                let bottom = m.row(3);
                if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
                    return Err(Error::invalid("joint transform", "last row must be (0,0,0,1)"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionMode {
    /// Test the MVC-interpolated proxy, correct the cage vertex.
    #[default]
    Proxy,
    /// Test and correct the cage vertex itself.
    Direct,
    Off,
}

/// PBD settings. Defaults other than `iterations` are engineering choices.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Frame interval in seconds; each substep advances `dt / substeps`.
    pub dt: f32,
    pub substeps: u32,
    pub iterations: u32,
    pub gravity: Vec3,
    pub damping: f32,
    pub stretch_compliance: f32,
    pub bend_compliance: f32,
    /// Global cage-volume constraint; `None` disables it.
    pub volume_compliance: Option<f32>,
    pub collision_margin: f32,
    pub collision: CollisionMode,
    pub max_splats_warn: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 30.0,
            substeps: 4,
            iterations: 15,
            gravity: Vec3::new(0.0, -9.8, 0.0),
            damping: 0.02,
            stretch_compliance: 0.0,
            bend_compliance: 0.0,
            volume_compliance: None,
            collision_margin: 1e-3,
            collision: CollisionMode::Proxy,
            max_splats_warn: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("{} must be > 0", self.dt)));
        }
        if self.substeps < 1 {
            return Err(Error::invalid("substeps", "must be >= 1"));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("iterations", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid("damping", format!("{} not in [0,1)", self.damping)));
        }
        if !(self.collision_margin >= 0.0) {
            return Err(Error::invalid("collision_margin", "must be >= 0"));
        }
        for (name, c) in [
            ("stretch_compliance", self.stretch_compliance),
            ("bend_compliance", self.bend_compliance),
            ("volume_compliance", self.volume_compliance.unwrap_or(0.0)),
        ] {
            if !(c >= 0.0) {
                return Err(Error::invalid(name, "must be >= 0"));
            }
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("gravity", "must be finite"));
        }
        Ok(())
    }

    pub fn substep_dt(&self) -> f32 {
        self.dt / self.substeps as f32
    }
}
