//! Deterministic synthetic scenes: primitive meshes, a two-joint head,
//! procedural hair styles, bald-skin splats and scripted head motion.
//!
//! Used by the tests, the benchmarks and the `make-fixture` command.

use std::collections::{BTreeMap, HashMap};
use std::f32::consts::PI;

use nalgebra::UnitQuaternion;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cage::{extract_surface, VoxelGrid};
use crate::deform::minimal_rotation;
use crate::mesh::TriMesh;
use crate::rig::bind_nearest;
use crate::types::{GaussianSplat, Mat3, Mat4, MotionFrame, Quat, SkinnedMesh, SplatSet, Vec3};

/// Geodesic sphere: an icosahedron split `subdivisions` times, projected
/// onto the sphere. `10·4ˢ + 2` vertices.
pub fn icosphere(center: Vec3, radius: f32, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f32.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriMesh::new(vertices.into_iter().map(|v| center + v * radius).collect(), faces)
}

/// Regular dodecahedron (20 vertices, 36 triangles).
pub fn dodecahedron(center: Vec3, radius: f32) -> TriMesh {
    // Dual of the icosahedron: one vertex per icosahedron face.
    let ico = icosphere(Vec3::zeros(), 1.0, 0);
    let vertices: Vec<Vec3> = ico
        .faces
        .iter()
        .map(|f| {
            center
                + ((ico.vertices[f[0] as usize] + ico.vertices[f[1] as usize] + ico.vertices[f[2] as usize]) / 3.0)
                    .normalize()
                    * radius
        })
        .collect();
    let mut faces = Vec::new();
    for (v, p) in ico.vertices.iter().enumerate() {
        // Faces around icosahedron vertex v, sorted counter-clockwise.
        let mut ring: Vec<u32> = (0..ico.faces.len() as u32)
            .filter(|&f| ico.faces[f as usize].contains(&(v as u32)))
            .collect();
        let axis = *p;
        let u = axis.cross(&Vec3::new(0.3, 0.5, 0.7)).normalize();
        let w = axis.cross(&u);
        let angle = |f: u32| {
            let d = vertices[f as usize] - center;
            d.dot(&w).atan2(d.dot(&u))
        };
        ring.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
        for k in 1..ring.len() - 1 {
            faces.push([ring[0], ring[k], ring[k + 1]]);
        }
    }
    TriMesh::new(vertices, faces)
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let q = Quat::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Randomly rotated ellipsoidal polytope around the origin with semi-axes in
/// `[0.6, 1.0]`. Convex.
pub fn random_convex_cage(rng: &mut impl Rng, subdivisions: u32) -> TriMesh {
    let mut m = icosphere(Vec3::zeros(), 1.0, subdivisions);
    let axes = Vec3::new(
        rng.random_range(0.6..1.0),
        rng.random_range(0.6..1.0),
        rng.random_range(0.6..1.0),
    );
    let r = random_rotation(rng);
    for v in &mut m.vertices {
        *v = r * v.component_mul(&axes);
    }
    m
}

/// Star-shaped (generally non-convex) cage: sphere vertices pushed to random
/// radii in `[0.7, 1.0]`.
pub fn random_star_cage(rng: &mut impl Rng, subdivisions: u32) -> TriMesh {
    let mut m = icosphere(Vec3::zeros(), 1.0, subdivisions);
    for v in &mut m.vertices {
        *v *= rng.random_range(0.7..1.0);
    }
    m
}

/// L-shaped prism: three unit cubes `[0,2]×[0,1]×[0,1] ∪ [0,1]×[1,2]×[0,1]`.
pub fn l_shaped_cage() -> TriMesh {
    let mut g = VoxelGrid::empty(Vec3::new(-1.0, -1.0, -1.0), 1.0, [4, 4, 3]);
    for (i, j) in [(1, 1), (2, 1), (1, 2)] {
        g.set(i, j, 1, true);
    }
    extract_surface(&g).expect("connected voxels")
}

pub const HEAD_JOINT: &str = "head";
pub const NECK_JOINT: &str = "neck";

/// Spherical head of `radius` at the origin, y up, face toward +z.
///
/// Vertices are bound to the `head` joint except a band under the chin,
/// which blends toward `neck`. Scalp faces are those entirely above
/// `0.1·radius` that are not on the face.
pub fn synthetic_head(radius: f32, subdivisions: u32) -> SkinnedMesh {
    let s = icosphere(Vec3::zeros(), radius, subdivisions);
    let skin_weights = s
        .vertices
        .iter()
        .map(|v| {
            let t = ((-0.6 * radius - v.y) / (0.4 * radius)).clamp(0.0, 1.0) * 0.5;
            if t == 0.0 {
                vec![(1, 1.0)]
            } else {
                vec![(0, t), (1, 1.0 - t)]
            }
        })
        .collect();
    let scalp = (0..s.faces.len())
        .filter(|&f| {
            let c = s.triangle(f).iter().sum::<Vec3>() / 3.0;
            s.triangle(f).iter().all(|v| v.y > 0.1 * radius) && !(c.z > 0.55 * radius && c.y < 0.6 * radius)
        })
        .map(|f| f as u32)
        .collect();
    SkinnedMesh {
        vertices: s.vertices,
        faces: s.faces,
        joints: vec![NECK_JOINT.into(), HEAD_JOINT.into()],
        skin_weights,
        scalp_faces: Some(scalp),
    }
}

/// Procedural hair styles around [`synthetic_head`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HairStyle {
    /// Straight strands falling to just below the ears.
    Bob,
    /// Strands gathered at the back of the head into a long tail.
    Ponytail,
    /// Helical strands forming a loose volume.
    Curly,
}

impl HairStyle {
    pub const ALL: [HairStyle; 3] = [HairStyle::Bob, HairStyle::Ponytail, HairStyle::Curly];

    pub fn name(self) -> &'static str {
        match self {
            HairStyle::Bob => "bob",
            HairStyle::Ponytail => "ponytail",
            HairStyle::Curly => "curly",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Quasi-uniform root directions on the upper back of the head.
fn root_directions(n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f32.sqrt());
    let jitter: Vec<f32> = (0..4 * n + 16).map(|_| rng.random_range(-0.05..0.05)).collect();
    let mut lattice = n.max(1);
    loop {
        // Fibonacci lattice over the cap y > 0.25, skipping the forehead.
        let out: Vec<Vec3> = (0..lattice)
            .filter_map(|i| {
                let y = 1.0 - 0.75 * (i as f32 + 0.5) / lattice as f32;
                let r = (1.0 - y * y).sqrt();
                let phi = golden * i as f32 + jitter[i % jitter.len()];
                let d = Vec3::new(r * phi.cos(), y, r * phi.sin());
                (!(d.z > 0.45 && d.y < 0.75)).then_some(d)
            })
            .collect();
        if out.len() >= n {
            return out.into_iter().take(n).collect();
        }
        lattice += n / 8 + 1;
    }
}

fn spherical(theta: f32, phi: f32) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
}

/// Strand center line at parameter `s ∈ [0, 1]`.
fn strand_point(style: HairStyle, root: &Vec3, radius: f32, s: f32, strand: usize) -> Vec3 {
    let theta0 = root.y.clamp(-1.0, 1.0).acos();
    let phi = root.z.atan2(root.x);
    match style {
        HairStyle::Bob => {
            let theta = theta0 + s * (1.95 - theta0).max(0.2);
            spherical(theta, phi) * radius * (1.08 + 0.12 * s)
        }
        HairStyle::Curly => {
            let theta = theta0 + s * (1.75 - theta0).max(0.2);
            let base = spherical(theta, phi) * radius * (1.4 + 0.1 * s);
            let tangent = Vec3::new(theta.cos() * phi.cos(), -theta.sin(), theta.cos() * phi.sin());
            let side = tangent.cross(&base).normalize();
            let normal = base.normalize();
            let w = 14.0 * s + strand as f32 * 0.7;
            base + (side * w.cos() + normal * w.sin()) * (0.25 * radius)
        }
        HairStyle::Ponytail => {
            let gather = Vec3::new(0.0, 0.25, -1.0).normalize();
            if s < 0.4 {
                // Over the scalp to the gather point, staying off the skin.
                let t = s / 0.4;
                let a = root.normalize();
                let angle = a.dot(&gather).clamp(-1.0, 1.0).acos();
                let dir = if angle < 1e-4 {
                    a
                } else {
                    (a * ((1.0 - t) * angle).sin() + gather * (t * angle).sin()) / angle.sin()
                };
                dir.normalize() * radius * (1.08 + 0.1 * t)
            } else {
                let t = (s - 0.4) / 0.6;
                let start = gather * radius * 1.18;
                let spread = 0.12 * radius * (1.0 - 0.6 * t);
                let a = strand as f32 * 2.399;
                start
                    + Vec3::new(0.0, -2.6 * radius * t, -0.35 * radius * t)
                    + Vec3::new(a.cos(), 0.0, a.sin()) * spread * t.sqrt().max(0.15)
            }
        }
    }
}

/// Hair splat cloud: `n_strands` strands of `splats_per_strand` thin splats
/// aligned with the strand direction (principal axis x).
pub fn hair_cloud(
    style: HairStyle,
    head_radius: f32,
    n_strands: usize,
    splats_per_strand: usize,
    seed: u64,
) -> SplatSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots = root_directions(n_strands, &mut rng);
    let mut splats = Vec::with_capacity(n_strands * splats_per_strand);
    let width = 0.004 * head_radius;
    for (k, root) in roots.iter().enumerate() {
        let shade = rng.random_range(0.8..1.2);
        for i in 0..splats_per_strand {
            let s0 = i as f32 / splats_per_strand as f32;
            let s1 = (i + 1) as f32 / splats_per_strand as f32;
            let a = strand_point(style, root, head_radius, s0, k);
            let b = strand_point(style, root, head_radius, s1, k);
            let d = b - a;
            let len = d.norm().max(4.0 * width);
            let dir = d.try_normalize(1e-12).unwrap_or_else(Vec3::x);
            let rot = minimal_rotation(&Vec3::x(), &dir, &Vec3::y());
            let mut splat = GaussianSplat::new(
                (a + b) * 0.5,
                rot,
                Vec3::new(0.5 * len, width, width),
                0.9,
                Vec3::new(0.25, 0.16, 0.09) * shade,
            );
            splat.feature = Some([2.0, -2.0]);
            splats.push(splat);
        }
    }
    SplatSet::global(splats)
}

/// Flat skin-colored splats lying on the mesh, one per face, in world space.
pub fn bald_splats(mesh: &SkinnedMesh) -> SplatSet {
    let splats = mesh
        .faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| mesh.vertices[i as usize]);
            let n = (b - a).cross(&(c - a)).normalize();
            let size = ((b - a).norm() + (c - a).norm()) / 4.0;
            let mut s = GaussianSplat::new(
                (a + b + c) / 3.0,
                minimal_rotation(&Vec3::z(), &n, &Vec3::x()),
                Vec3::new(size, size, 0.1 * size),
                1.0,
                Vec3::new(0.85, 0.66, 0.55),
            );
            s.feature = Some([-2.0, 2.0]);
            s
        })
        .collect();
    SplatSet::global(splats)
}

/// Bald splats rigged to their faces (triangle-local).
pub fn bald_local(mesh: &SkinnedMesh) -> SplatSet {
    bind_nearest(&bald_splats(mesh), mesh).expect("non-empty head mesh")
}

/// Rotation by `angle` about the x axis through `pivot`.
pub fn rotation_about(pivot: Vec3, axis: Vec3, angle: f32) -> Mat4 {
    let r = Mat4::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    Mat4::new_translation(&pivot) * r * Mat4::new_translation(&-pivot)
}

/// Neck pivot of [`synthetic_head`].
pub fn neck_pivot(head_radius: f32) -> Vec3 {
    Vec3::new(0.0, -1.2 * head_radius, 0.0)
}

/// Nodding: the head pitches `amplitude·sin(2πf/period)` about the neck
/// pivot; the neck follows with half the angle.
pub fn nod_motion(head_radius: f32, frames: usize, amplitude: f32, period: f32) -> Vec<MotionFrame> {
    let pivot = neck_pivot(head_radius);
    (0..frames)
        .map(|f| {
            let angle = amplitude * (2.0 * PI * (f + 1) as f32 / period).sin();
            MotionFrame::Joints(BTreeMap::from([
                (HEAD_JOINT.to_string(), rotation_about(pivot, Vec3::x(), angle)),
                (NECK_JOINT.to_string(), rotation_about(pivot, Vec3::x(), 0.5 * angle)),
            ]))
        })
        .collect()
}

/// Both joints translated by `d`.
pub fn translation_motion(d: Vec3) -> MotionFrame {
    MotionFrame::Joints(BTreeMap::from([
        (HEAD_JOINT.to_string(), Mat4::new_translation(&d)),
        (NECK_JOINT.to_string(), Mat4::new_translation(&d)),
    ]))
}

/// Head radius of the bundled demo scene.
pub const DEMO_HEAD_RADIUS: f32 = 0.1;

/// A complete demo input: rigged head, world-space bald and hair splats and
/// a nodding motion.
#[derive(Debug, Clone)]
pub struct DemoScene {
    pub mesh: SkinnedMesh,
    pub bald: SplatSet,
    pub hair: SplatSet,
    pub motion: Vec<MotionFrame>,
}

/// Demo scene on a [`DEMO_HEAD_RADIUS`] head nodding with a two-second
/// period at 30 fps.
pub fn demo_scene(style: HairStyle, n_strands: usize, splats_per_strand: usize, frames: usize, seed: u64) -> DemoScene {
    let mesh = synthetic_head(DEMO_HEAD_RADIUS, 3);
    DemoScene {
        bald: bald_splats(&mesh),
        hair: hair_cloud(style, DEMO_HEAD_RADIUS, n_strands, splats_per_strand, seed),
        motion: nod_motion(DEMO_HEAD_RADIUS, frames, 0.3, 60.0),
        mesh,
    }
}

/// Two clusters for boundary reassignment: bright round skin splats on the
/// plane `y = 0`, dark thin hair far above it, and a contact band just
/// above the skin mixing both kinds.
#[derive(Debug, Clone)]
pub struct PlantedBoundary {
    pub hair: SplatSet,
    pub bald: SplatSet,
    /// Hair-set indices of the band (all within `boundary_radius` of skin).
    pub contact: Vec<usize>,
    /// Band members that look like skin.
    pub skin_like: Vec<usize>,
    pub boundary_radius: f32,
}

pub fn planted_boundary(n_interior: usize, n_hair_band: usize, n_skin_band: usize, seed: u64) -> PlantedBoundary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skin = |rng: &mut ChaCha8Rng, mu: Vec3| {
        GaussianSplat::new(
            mu,
            Quat::identity(),
            Vec3::repeat(0.02 * rng.random_range(0.9..1.1)),
            1.0,
            Vec3::new(0.85, 0.66, 0.55) + Vec3::repeat(rng.random_range(-0.03..0.03)),
        )
    };
    let hair = |rng: &mut ChaCha8Rng, mu: Vec3| {
        GaussianSplat::new(
            mu,
            Quat::identity(),
            Vec3::new(0.05 * rng.random_range(0.9..1.1), 0.004, 0.004),
            0.9,
            Vec3::new(0.12, 0.08, 0.05) + Vec3::repeat(rng.random_range(-0.03..0.03)),
        )
    };
    let mut bald = Vec::new();
    for i in 0..21 {
        for k in 0..21 {
            let mu = Vec3::new(-1.0 + 0.1 * i as f32, 0.0, -1.0 + 0.1 * k as f32);
            bald.push(skin(&mut rng, mu));
        }
    }
    let mut splats = Vec::new();
    for _ in 0..n_interior {
        let mu = Vec3::new(
            rng.random_range(-0.9..0.9),
            rng.random_range(0.3..1.0),
            rng.random_range(-0.9..0.9),
        );
        splats.push(hair(&mut rng, mu));
    }
    let mut contact = Vec::new();
    let mut skin_like = Vec::new();
    for b in 0..n_hair_band + n_skin_band {
        let mu = Vec3::new(
            rng.random_range(-0.9..0.9),
            rng.random_range(0.02..0.08),
            rng.random_range(-0.9..0.9),
        );
        contact.push(splats.len());
        if b < n_skin_band {
            skin_like.push(splats.len());
            splats.push(skin(&mut rng, mu));
        } else {
            splats.push(hair(&mut rng, mu));
        }
    }
    PlantedBoundary {
        hair: SplatSet::global(splats),
        bald: SplatSet::global(bald),
        contact,
        skin_like,
        boundary_radius: 0.15,
    }
}
