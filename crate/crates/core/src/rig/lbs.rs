use crate::error::{Error, Result};
use crate::types::{Mat4, MotionFrame, SkinnedMesh, Vec3};

/// Per-joint transforms of `frame`, ordered like `mesh.joints`.
pub fn joint_transforms(mesh: &SkinnedMesh, frame: &MotionFrame) -> Result<Option<Vec<Mat4>>> {
    match frame {
        MotionFrame::Vertices(_) => Ok(None),
        MotionFrame::Joints(map) => {
            for name in map.keys() {
                if !mesh.joints.iter().any(|j| j == name) {
                    return Err(Error::UnknownJoint(name.clone()));
                }
            }
            mesh.joints
                .iter()
                .map(|j| map.get(j).copied().ok_or_else(|| Error::MissingJoint(j.clone())))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        }
    }
}

#[inline]
pub(crate) fn transform_point(m: &Mat4, p: &Vec3) -> Vec3 {
    m.fixed_view::<3, 3>(0, 0) * p + m.fixed_view::<3, 1>(0, 3)
}

/// Blends `transforms` by `weights` and applies the result to `rest`.
#[inline]
pub(crate) fn blend_point(transforms: &[Mat4], weights: &[(u32, f32)], rest: &Vec3) -> Vec3 {
    let mut out = Vec3::zeros();
    for &(j, w) in weights {
        out += transform_point(&transforms[j as usize], rest) * w;
    }
    out
}

/// Posed vertex positions: `v = Σ_j w_j T_j v_rest`, or the explicit
/// vertices verbatim.
pub fn lbs_pose(mesh: &SkinnedMesh, frame: &MotionFrame) -> Result<Vec<Vec3>> {
    if mesh.skin_weights.len() != mesh.vertices.len() {
        return Err(Error::CountMismatch {
            what: "skin weight rows",
            expected: mesh.vertices.len(),
            got: mesh.skin_weights.len(),
        });
    }
    match frame {
        MotionFrame::Vertices(v) => {
            if v.len() != mesh.vertices.len() {
                return Err(Error::CountMismatch {
                    what: "explicit vertices",
                    expected: mesh.vertices.len(),
                    got: v.len(),
                });
            }
            Ok(v.clone())
        }
        MotionFrame::Joints(_) => {
            let transforms = joint_transforms(mesh, frame)?.expect("joint frame");
            Ok(mesh
                .vertices
                .iter()
                .zip(&mesh.skin_weights)
                .map(|(v, w)| blend_point(&transforms, w, v))
                .collect())
        }
    }
}
