//! Seven-point splat representation and principal-axis deformation.
//!
//! A splat is tracked by its center and the six endpoints `μ ± sᵢ R êᵢ`.
//! After the cage moves, only the principal axis (the longest one, chosen
//! once in the source pose) is read back: the new center is the midpoint of
//! its endpoints, the rotation turns the old axis direction onto the new one
//! by the minimal rotation, and all scales follow the axis length ratio.

use nalgebra::{Unit, UnitQuaternion};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mvc::{check_cage_len, CageSoa, MvcWeights, POINTS_PER_SPLAT};
use crate::types::{quat_to_matrix_unchecked, GaussianSplat, Quat, SplatFrame, SplatSet, Vec3};

/// Axis length below which a deformed splat is muted for the frame.
pub const DEGENERATE_AXIS: f32 = 1e-9;

/// Center and axis endpoints, ordered `x+, x−, y+, y−, z+, z−`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatEndpoints {
    pub center: Vec3,
    pub axis_ends: [Vec3; 6],
    /// Index of the longest axis (ties resolve x, then y, then z).
    pub principal_axis: usize,
}

impl SplatEndpoints {
    /// The seven tracked points, center first.
    pub fn points(&self) -> [Vec3; POINTS_PER_SPLAT] {
        let e = &self.axis_ends;
        [self.center, e[0], e[1], e[2], e[3], e[4], e[5]]
    }

    /// Principal `(plus, minus)` endpoints.
    pub fn principal_ends(&self) -> (Vec3, Vec3) {
        let i = self.principal_axis;
        (self.axis_ends[2 * i], self.axis_ends[2 * i + 1])
    }
}

/// Longest axis of `scale`; ties resolve x, then y, then z.
pub fn principal_axis(scale: &Vec3) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if scale[i] > scale[best] {
            best = i;
        }
    }
    best
}

/// Second-longest axis, using the same tie order.
fn secondary_axis(scale: &Vec3, principal: usize) -> usize {
    let mut best = usize::MAX;
    for i in (0..3).filter(|&i| i != principal) {
        if best == usize::MAX || scale[i] > scale[best] {
            best = i;
        }
    }
    best
}

pub fn endpoints(splat: &GaussianSplat) -> SplatEndpoints {
    let r = quat_to_matrix_unchecked(&splat.rot.normalize());
    let mut axis_ends = [Vec3::zeros(); 6];
    for i in 0..3 {
        let d = r.column(i) * splat.scale[i];
        axis_ends[2 * i] = splat.mu + d;
        axis_ends[2 * i + 1] = splat.mu - d;
    }
    SplatEndpoints {
        center: splat.mu,
        axis_ends,
        principal_axis: principal_axis(&splat.scale),
    }
}

/// Source-pose quantities needed to reconstruct one splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformSource {
    pub principal_axis: usize,
    /// `‖x⁺ − x⁻‖` of the principal axis at rest.
    pub length: f32,
    /// Unit principal direction at rest.
    pub direction: Vec3,
    /// Rotation axis used when the principal direction flips exactly.
    pub flip_axis: Vec3,
}

impl DeformSource {
    pub fn new(splat: &GaussianSplat) -> Result<Self> {
        let ends = endpoints(splat);
        let (plus, minus) = ends.principal_ends();
        let d = plus - minus;
        let length = d.norm();
        if !(length > DEGENERATE_AXIS) {
            return Err(Error::invalid("splat", "principal axis is degenerate"));
        }
        let r = quat_to_matrix_unchecked(&splat.rot.normalize());
        let second = secondary_axis(&splat.scale, ends.principal_axis);
        Ok(Self {
            principal_axis: ends.principal_axis,
            length,
            direction: d / length,
            flip_axis: r.column(second).into_owned(),
        })
    }

    /// Deformed splat from deformed principal endpoints. Degenerate axes
    /// mute the splat (opacity 0) and keep the source rotation and scale.
    #[inline]
    pub fn apply(&self, source: &GaussianSplat, plus: Vec3, minus: Vec3) -> GaussianSplat {
        let mu = (plus + minus) * 0.5;
        let d = plus - minus;
        let length = d.norm();
        if !(length >= DEGENERATE_AXIS) {
            return GaussianSplat {
                mu,
                opacity: 0.0,
                ..*source
            };
        }
        let delta = minimal_rotation(&self.direction, &(d / length), &self.flip_axis);
        GaussianSplat {
            mu,
            rot: (delta * source.rot).normalize(),
            scale: source.scale * (length / self.length),
            ..*source
        }
    }
}

/// Minimal rotation taking unit `from` onto unit `to`; exactly opposite
/// directions turn by 180° about `flip_axis`.
pub fn minimal_rotation(from: &Vec3, to: &Vec3, flip_axis: &Vec3) -> Quat {
    let (a, b) = (from.cast::<f64>(), to.cast::<f64>());
    let cross = a.cross(&b);
    let sin = cross.norm();
    let cos = a.dot(&b);
    if sin <= 1e-12 {
        if cos > 0.0 {
            return Quat::identity();
        }
        let axis = flip_axis.cast::<f64>().normalize();
        return Quat::new(0.0, axis.x as f32, axis.y as f32, axis.z as f32);
    }
    let angle = sin.atan2(cos);
    let q = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(cross / sin), angle);
    q.into_inner().cast::<f32>()
}

/// Rebuilds a splat from its source and all seven deformed points.
pub fn reconstruct(
    source: &GaussianSplat,
    ends: &SplatEndpoints,
    deformed: &[Vec3; POINTS_PER_SPLAT],
) -> Result<GaussianSplat> {
    let mut plan = DeformSource::new(source)?;
    plan.principal_axis = ends.principal_axis;
    let i = ends.principal_axis;
    Ok(plan.apply(source, deformed[1 + 2 * i], deformed[2 + 2 * i]))
}

/// Precomputed per-splat sources for repeated deformation of one set.
#[derive(Debug, Clone)]
pub struct DeformPlan {
    pub sources: Vec<DeformSource>,
}

impl DeformPlan {
    pub fn new(hair: &SplatSet) -> Result<Self> {
        if hair.frame != SplatFrame::Global {
            return Err(Error::invalid("hair", "deformation expects a global set"));
        }
        Ok(Self {
            sources: hair.splats.iter().map(DeformSource::new).collect::<Result<_>>()?,
        })
    }

    /// Deforms `hair` into `out`, evaluating only the two principal rows of
    /// each splat. `out` is resized to match.
    pub fn deform_into(
        &self,
        hair: &SplatSet,
        weights: &MvcWeights,
        cage: &CageSoa,
        out: &mut Vec<GaussianSplat>,
    ) -> Result<()> {
        if weights.n_splats() != hair.len() || self.sources.len() != hair.len() {
            return Err(Error::CountMismatch {
                what: "weight splats",
                expected: hair.len(),
                got: weights.n_splats(),
            });
        }
        if cage.len() != weights.n_cage_verts() {
            return Err(Error::CountMismatch {
                what: "cage vertices",
                expected: weights.n_cage_verts(),
                got: cage.len(),
            });
        }
        out.resize(hair.len(), GaussianSplat::default());
        out.par_iter_mut().with_min_len(256).enumerate().for_each(|(n, dst)| {
            let src = &self.sources[n];
            let i = src.principal_axis;
            let plus = weights.row(n, 1 + 2 * i).apply(cage);
            let minus = weights.row(n, 2 + 2 * i).apply(cage);
            *dst = src.apply(&hair.splats[n], plus, minus);
        });
        Ok(())
    }
}

/// Deforms every hair splat by the cage: MVC-interpolated endpoints, then
/// principal-axis reconstruction. Order is preserved.
pub fn deform_set(hair: &SplatSet, weights: &MvcWeights, deformed_cage: &[Vec3]) -> Result<SplatSet> {
    check_cage_len(weights, deformed_cage)?;
    let plan = DeformPlan::new(hair)?;
    let mut out = Vec::new();
    plan.deform_into(hair, weights, &CageSoa::new(deformed_cage), &mut out)?;
    Ok(SplatSet::global(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mvc::bake_weights;
    use crate::types::{quat_to_matrix, Mat3};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn splat(mu: Vec3, rot: Quat, scale: Vec3) -> GaussianSplat {
        GaussianSplat::new(mu, rot, scale, 0.8, Vec3::new(0.2, 0.3, 0.4))
    }

    fn rot_x(deg: f32) -> Quat {
        UnitQuaternion::from_axis_angle(&Vec3::x_axis(), deg.to_radians()).into_inner()
    }

    fn quat_close(a: &Quat, b: &Quat, tol: f32) -> bool {
        (a.coords - b.coords).norm() < tol || (a.coords + b.coords).norm() < tol
    }

    #[test]
    fn axis_aligned_endpoints() {
        let e = endpoints(&splat(Vec3::zeros(), Quat::identity(), Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(e.axis_ends[4], Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(e.axis_ends[5], Vec3::new(0.0, 0.0, -3.0));
        assert_eq!(e.principal_axis, 2);
    }

    #[test]
    fn isotropic_ties_pick_x() {
        let e = endpoints(&splat(Vec3::zeros(), Quat::identity(), Vec3::repeat(1.0)));
        assert_eq!(e.principal_axis, 0);
        assert_eq!(principal_axis(&Vec3::new(1.0, 2.0, 2.0)), 1);
    }

    #[test]
    fn quarter_turn_about_x_moves_y_ends_onto_z() {
        let e = endpoints(&splat(Vec3::zeros(), rot_x(90.0), Vec3::new(0.1, 0.5, 0.2)));
        assert!((e.axis_ends[2] - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-6);
        assert!((e.axis_ends[3] - Vec3::new(0.0, 0.0, -0.5)).norm() < 1e-6);
    }

    fn deformed(s: &GaussianSplat, f: impl Fn(Vec3) -> Vec3) -> (SplatEndpoints, [Vec3; 7]) {
        let e = endpoints(s);
        (e, e.points().map(f))
    }

    #[test]
    fn identity_reconstruction() {
        let s = splat(Vec3::new(0.1, 0.2, 0.3), rot_x(30.0), Vec3::new(0.3, 0.1, 0.05));
        let (e, d) = deformed(&s, |p| p);
        let r = reconstruct(&s, &e, &d).unwrap();
        assert!((r.mu - s.mu).norm() < 1e-6);
        assert!(quat_close(&r.rot, &s.rot, 1e-5));
        assert!((r.scale - s.scale).norm() < 1e-6);
        assert_eq!((r.opacity, r.color), (s.opacity, s.color));
    }

    #[test]
    fn translation_moves_center_only() {
        let s = splat(Vec3::new(0.1, 0.2, 0.3), rot_x(30.0), Vec3::new(0.3, 0.1, 0.05));
        let t = Vec3::new(1.0, -2.0, 0.5);
        let (e, d) = deformed(&s, |p| p + t);
        let r = reconstruct(&s, &e, &d).unwrap();
        assert!((r.mu - (s.mu + t)).norm() < 1e-5);
        assert!(quat_close(&r.rot, &s.rot, 1e-5));
        assert!((r.scale - s.scale).norm() < 1e-6);
    }

    #[test]
    fn uniform_scaling_doubles_scale() {
        let s = splat(Vec3::new(0.1, 0.2, 0.3), rot_x(10.0), Vec3::new(0.3, 0.1, 0.05));
        let (e, d) = deformed(&s, |p| p * 2.0);
        let r = reconstruct(&s, &e, &d).unwrap();
        assert!((r.mu - s.mu * 2.0).norm() < 1e-6);
        assert!((r.scale - s.scale * 2.0).norm() < 1e-6);
        assert!(quat_close(&r.rot, &s.rot, 1e-5));
    }

    #[test]
    fn x_to_y_is_quarter_turn_about_z() {
        let s = splat(Vec3::zeros(), Quat::identity(), Vec3::new(0.5, 0.1, 0.1));
        let q = minimal_rotation(&Vec3::x(), &Vec3::y(), &Vec3::z());
        let expected = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), std::f32::consts::FRAC_PI_2).into_inner();
        assert!(quat_close(&q, &expected, 1e-6));
        let (e, _) = deformed(&s, |p| p);
        let mut d = e.points();
        d[1] = Vec3::new(0.0, 0.5, 0.0);
        d[2] = Vec3::new(0.0, -0.5, 0.0);
        let r = reconstruct(&s, &e, &d).unwrap();
        let m = quat_to_matrix(&r.rot).unwrap();
        assert!((m * Vec3::x() - Vec3::y()).norm() < 1e-6);
    }

    #[test]
    fn antipodal_flip_turns_about_second_axis() {
        // Principal x, second-longest z.
        let s = splat(Vec3::zeros(), Quat::identity(), Vec3::new(0.5, 0.1, 0.2));
        let (e, mut d) = deformed(&s, |p| p);
        d.swap(1, 2);
        let r = reconstruct(&s, &e, &d).unwrap();
        let m = quat_to_matrix(&r.rot).unwrap();
        assert!((m * Vec3::x() + Vec3::x()).norm() < 1e-6);
        assert!((m * Vec3::z() - Vec3::z()).norm() < 1e-6);
    }

    #[test]
    fn collapsed_axis_mutes_splat() {
        let s = splat(Vec3::zeros(), Quat::identity(), Vec3::new(0.5, 0.1, 0.2));
        let (e, mut d) = deformed(&s, |p| p);
        d[1] = Vec3::new(0.3, 0.0, 0.0);
        d[2] = Vec3::new(0.3, 0.0, 0.0);
        let r = reconstruct(&s, &e, &d).unwrap();
        assert_eq!(r.opacity, 0.0);
        assert_eq!(r.mu, Vec3::new(0.3, 0.0, 0.0));
        assert!(r.scale.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn center_is_exact_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = splat(Vec3::zeros(), rot_x(45.0), Vec3::new(0.1, 0.4, 0.2));
        let e = endpoints(&s);
        for _ in 0..100 {
            let mut d = e.points();
            for p in &mut d {
                *p += Vec3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                );
            }
            let r = reconstruct(&s, &e, &d).unwrap();
            assert_eq!(r.mu, (d[3] + d[4]) * 0.5);
        }
    }

    fn hair_in_box(rng: &mut ChaCha8Rng, n: usize) -> SplatSet {
        SplatSet::global(
            (0..n)
                .map(|_| {
                    let q = Quat::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                    .normalize();
                    splat(
                        Vec3::new(
                            rng.random_range(-0.3..0.3),
                            rng.random_range(-0.3..0.3),
                            rng.random_range(-0.3..0.3),
                        ),
                        q,
                        Vec3::new(0.04, 0.01, 0.02),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn rest_cage_is_identity_and_rigid_motion_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cage = fixtures::icosphere(Vec3::zeros(), 1.0, 1);
        let hair = hair_in_box(&mut rng, 200);
        let w = bake_weights(&hair, &cage.vertices, &cage.faces).unwrap();
        let same = deform_set(&hair, &w, &cage.vertices).unwrap();
        for (a, b) in hair.splats.iter().zip(&same.splats) {
            assert!((a.mu - b.mu).norm() < 1e-5);
            assert!((a.scale - b.scale).norm() < 1e-5);
            assert!(quat_close(&a.rot, &b.rot, 1e-4));
        }
        let q = UnitQuaternion::from_euler_angles(0.3, -0.7, 1.1);
        let qm: Mat3 = q.to_rotation_matrix().into_inner();
        let t = Vec3::new(0.5, 1.0, -0.25);
        let moved: Vec<_> = cage.vertices.iter().map(|v| qm * v + t).collect();
        let out = deform_set(&hair, &w, &moved).unwrap();
        for (a, b) in hair.splats.iter().zip(&out.splats) {
            assert!((b.mu - (qm * a.mu + t)).norm() < 1e-4);
            let ua = DeformSource::new(a).unwrap().direction;
            let ub = DeformSource::new(b).unwrap().direction;
            assert!((ub - qm * ua).norm() < 1e-3);
        }
    }

    #[test]
    fn deform_set_checks_cage_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cage = fixtures::icosphere(Vec3::zeros(), 1.0, 1);
        let hair = hair_in_box(&mut rng, 5);
        let w = bake_weights(&hair, &cage.vertices, &cage.faces).unwrap();
        assert!(matches!(
            deform_set(&hair, &w, &cage.vertices[1..]),
            Err(Error::CountMismatch { .. })
        ));
    }
}
