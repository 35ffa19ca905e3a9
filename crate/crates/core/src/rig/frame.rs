use crate::error::{Error, Result};
use crate::types::{matrix_to_quat, GaussianSplat, Mat3, Quat, Vec3};

/// Minimum triangle area accepted as a rigging host.
pub const MIN_FACE_AREA: f32 = 1e-12;

/// Similarity transform attached to a mesh triangle.
///
/// Columns of `rotation` are `[ê₁, n̂, ê₁ × n̂]` with `ê₁` along `v1 − v0` and
/// `n̂` the unit face normal; `translation` is the centroid; `eta` is the mean
/// of the first edge length and the height of `v2` over that edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleFrame {
    pub rotation: Mat3,
    pub rotation_quat: Quat,
    pub translation: Vec3,
    pub eta: f32,
}

impl TriangleFrame {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            rotation_quat: Quat::identity(),
            translation: Vec3::zeros(),
            eta: 1.0,
        }
    }

    pub fn from_triangle(v0: Vec3, v1: Vec3, v2: Vec3) -> Option<Self> {
        let e1 = v1 - v0;
        let e2 = v2 - v0;
        let n = e1.cross(&e2);
        let twice_area = n.norm();
        let len1 = e1.norm();
        if !(twice_area > 2.0 * MIN_FACE_AREA) || len1 == 0.0 {
            return None;
        }
        let e1_hat = e1 / len1;
        let n_hat = n / twice_area;
        let third = e1_hat.cross(&n_hat);
        let rotation = Mat3::from_columns(&[e1_hat, n_hat, third]);
        let height = twice_area / len1;
        Some(Self {
            rotation,
            rotation_quat: matrix_to_quat(&rotation),
            translation: (v0 + v1 + v2) / 3.0,
            eta: 0.5 * (len1 + height),
        })
    }

    #[inline]
    pub fn point_to_global(&self, local: &Vec3) -> Vec3 {
        self.rotation * local * self.eta + self.translation
    }

    #[inline]
    pub fn point_to_local(&self, global: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(global - self.translation)) / self.eta
    }
}

/// Frame of `face` over the given (possibly posed) vertex positions.
pub fn triangle_frame(vertices: &[Vec3], faces: &[[u32; 3]], face: usize) -> Result<TriangleFrame> {
    let f = faces.get(face).ok_or(Error::IndexOutOfRange {
        what: "face",
        index: face,
        len: faces.len(),
    })?;
    let [a, b, c] = f.map(|i| vertices.get(i as usize).copied());
    let (Some(a), Some(b), Some(c)) = (a, b, c) else {
        return Err(Error::IndexOutOfRange {
            what: "face vertex",
            index: f.iter().copied().max().unwrap_or(0) as usize,
            len: vertices.len(),
        });
    };
    TriangleFrame::from_triangle(a, b, c).ok_or(Error::DegenerateFace { face })
}

/// Triangle-local splat to world space: `μ = ηRμ′ + t`, `r = R r′`, `s = η s′`.
pub fn local_to_global(splat: &GaussianSplat, frame: &TriangleFrame) -> Result<GaussianSplat> {
    if splat.binding.is_none() {
        return Err(Error::MissingBinding { index: 0 });
    }
    Ok(local_to_global_unchecked(splat, frame))
}

#[inline]
pub(crate) fn local_to_global_unchecked(splat: &GaussianSplat, frame: &TriangleFrame) -> GaussianSplat {
    GaussianSplat {
        mu: frame.point_to_global(&splat.mu),
        rot: frame.rotation_quat * splat.rot,
        scale: splat.scale * frame.eta,
        ..*splat
    }
}

/// Exact inverse of [`local_to_global`]; the result carries binding `face`.
pub fn global_to_local(splat: &GaussianSplat, frame: &TriangleFrame, face: u32) -> GaussianSplat {
    GaussianSplat {
        mu: frame.point_to_local(&splat.mu),
        rot: frame.rotation_quat.conjugate() * splat.rot,
        scale: splat.scale / frame.eta,
        binding: Some(face),
        ..*splat
    }
}
