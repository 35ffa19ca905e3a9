//! Acceptance criteria 1–10. Each test prints one `criterion N: PASS|FAIL|UNVERIFIED`
//! line with the measured figures.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cagehair_core::cage::{build_cage, mark_roots, Cage, CageOptions};
use cagehair_core::decomposition::{reassign, split_boundary, ReassignConfig};
use cagehair_core::deform::endpoints;
use cagehair_core::engine::{frame_file_name, run_sequence, RunOptions, Scene, Simulator};
use cagehair_core::fixtures::{self, demo_scene, HairStyle};
use cagehair_core::io::{read_splats, Settings};
use cagehair_core::mesh::{winding_number, TriMesh};
use cagehair_core::mvc::{tracked_points, CageGeometry};
use cagehair_core::pbd::{
    build_tethers, predict, project_constraints, update_velocities, ConstraintSet, SolverState, StretchConstraint,
};
use cagehair_core::rig::{global_to_local, local_to_global, pose_local_splats, FaceBvh, TriangleFrame};
use cagehair_core::{CollisionMode, GaussianSplat, Mat4, MotionFrame, Quat, SolverConfig, SplatSet, Vec3};

/// Writes past the test harness's output capture so the line always shows.
fn announce(line: String) {
    use std::io::Write;
    writeln!(std::io::stderr(), "{line}").unwrap();
}

fn report(n: u32, pass: bool, detail: String) {
    announce(format!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" }));
    assert!(pass, "criterion {n} failed: {detail}");
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let q = Quat::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if q.norm() > 0.1 {
            return q.normalize();
        }
    }
}

fn quat_dist(a: &Quat, b: &Quat) -> f32 {
    (a.coords - b.coords).abs().max().min((a.coords + b.coords).abs().max())
}

#[test]
fn criterion_01_mvc_partition_of_unity_and_linear_precision() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_pou, mut worst_lin, mut points) = (0.0f64, 0.0f64, 0usize);
    for c in 0..6 {
        let mesh = if c % 2 == 0 {
            fixtures::random_convex_cage(&mut rng, 1)
        } else {
            fixtures::random_star_cage(&mut rng, 1)
        };
        assert!(mesh.is_watertight());
        let diam = mesh.diameter() as f64;
        let geo = CageGeometry::new(&mesh.vertices, &mesh.faces).unwrap();
        for _ in 0..200 {
            // Both cage kinds are star-shaped about the origin.
            let f = mesh.faces[rng.random_range(0..mesh.faces.len())];
            let (mut u, mut v) = (rng.random_range(0.0..1.0f32), rng.random_range(0.0..1.0f32));
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            let [a, b, cc] = f.map(|i| mesh.vertices[i as usize]);
            let surface = a * (1.0 - u - v) + b * u + cc * v;
            let x = surface * rng.random_range(0.05..0.95f32);
            let w = geo.weights(&x).unwrap();
            worst_pou = worst_pou.max((w.iter().sum::<f64>() - 1.0).abs());
            let mut rec = [0.0f64; 3];
            for (wi, p) in w.iter().zip(&mesh.vertices) {
                for k in 0..3 {
                    rec[k] += wi * p[k] as f64;
                }
            }
            let err = (0..3).map(|k| (rec[k] - x[k] as f64).powi(2)).sum::<f64>().sqrt() / diam;
            worst_lin = worst_lin.max(err);
            points += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        points >= 1000 && worst_pou < 1e-4 && worst_lin < 1e-4 && secs < 10.0,
        format!("{points} points on 6 cages, max |Σw−1| = {worst_pou:.2e}, max reproduction error = {worst_lin:.2e}·diam, {secs:.2} s"),
    );
}

#[test]
fn criterion_02_rigging_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f32;
    let mut pairs = 0;
    while pairs < 10_000 {
        let mut corner = || {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let (a, b, c) = (corner(), corner(), corner());
        if (b - a).cross(&(c - a)).norm() < 1e-2 {
            continue;
        }
        let frame = TriangleFrame::from_triangle(a, b, c).unwrap();
        let s = GaussianSplat::new(
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
            random_unit_quat(&mut rng),
            Vec3::new(
                rng.random_range(0.001..0.3),
                rng.random_range(0.001..0.3),
                rng.random_range(0.001..0.3),
            ),
            0.7,
            Vec3::new(0.3, 0.2, 0.1),
        );
        let back = local_to_global(&global_to_local(&s, &frame, 0), &frame).unwrap();
        worst = worst
            .max((back.mu - s.mu).abs().max())
            .max((back.scale - s.scale).abs().max())
            .max(quat_dist(&back.rot, &s.rot));
        pairs += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        worst < 1e-5 && secs < 5.0,
        format!("{pairs} pairs, max deviation {worst:.2e}, {secs:.2} s"),
    );
}

fn particles(positions: Vec<Vec3>, inv_mass: Vec<f32>, n_constraints: usize) -> SolverState {
    SolverState {
        velocities: vec![Vec3::zeros(); positions.len()],
        predicted: positions.clone(),
        positions,
        inv_mass,
        lambdas: vec![0.0; n_constraints],
        time: 0.0,
    }
}

fn stretch_chain(n: usize, rest: f32, inv_mass: &[f32]) -> ConstraintSet {
    let stretch: Vec<StretchConstraint> = (0..n as u32 - 1)
        .map(|i| StretchConstraint {
            i,
            j: i + 1,
            rest,
            compliance: 0.0,
        })
        .collect();
    ConstraintSet {
        tethers: build_tethers(&stretch, inv_mass),
        stretch,
        bend: vec![],
        volume: None,
        collision_margin: 0.0,
    }
}

#[test]
fn criterion_03_pbd_unit_dynamics() {
    // Free fall: one 0.1 s step under g = 9.8 along −z.
    let none = stretch_chain(1, 1.0, &[1.0]);
    let mut s = particles(vec![Vec3::zeros()], vec![1.0], 0);
    predict(&mut s, Vec3::new(0.0, 0.0, -9.8), 0.0, 0.1, None);
    let v_pred = s.velocities[0].z;
    project_constraints(&mut s, &none, None, 15, 0.1);
    update_velocities(&mut s, 0.1);
    let v_fd = s.velocities[0].z;
    let free_fall = v_pred == -0.98f32 && (v_fd - -0.98f32).abs() <= 4.0 * f32::EPSILON;

    // Two particles stretched to twice the rest length.
    let pair = stretch_chain(2, 1.0, &[1.0, 1.0]);
    let mut s = particles(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)], vec![1.0, 1.0], 1);
    project_constraints(&mut s, &pair, None, 1, 0.1);
    let err = ((s.predicted[1] - s.predicted[0]).norm() - 1.0).abs();
    report(
        3,
        free_fall && err < 1e-6,
        format!("free-fall v_z = {v_pred} (after projection {v_fd}), two-particle length error {err:.2e}"),
    );
}

#[test]
fn criterion_04_hanging_chain_convergence() {
    let n = 20;
    let rest = 0.05f32;
    let positions = (0..n).map(|i| Vec3::new(0.0, -2.0 * rest * i as f32, 0.0)).collect();
    let mut inv_mass = vec![1.0; n];
    inv_mass[0] = 0.0;
    let chain = stretch_chain(n, rest, &inv_mass);
    let mut s = particles(positions, inv_mass, chain.len());
    let dt = 1.0 / 120.0;
    predict(&mut s, Vec3::new(0.0, -9.8, 0.0), 0.0, dt, None);
    project_constraints(&mut s, &chain, None, 15, dt);
    let residual = chain.max_relative_stretch(&s.predicted);
    report(
        4,
        residual < 0.01,
        format!(
            "20-vertex chain from 2× stretch, 15 iterations: max stretch residual {:.3}% of rest",
            100.0 * residual
        ),
    );
}

/// Demo scene with a given hair size, cage target and solver.
fn demo(
    style: HairStyle,
    strands: usize,
    per_strand: usize,
    frames: usize,
    target: usize,
    solver: SolverConfig,
) -> (Scene, Vec<MotionFrame>) {
    let d = demo_scene(style, strands, per_strand, frames, 7);
    let settings = Settings {
        solver,
        target_verts: target,
        ..Default::default()
    };
    let (scene, _) = Scene::assemble(d.bald, d.hair, d.mesh, None, &settings).unwrap();
    (scene, d.motion)
}

struct CollisionRun {
    worst_probe: f32,
    mean_gap: f64,
    deepest_center: f32,
}

fn collision_run(scene: &Scene, motion: &[MotionFrame]) -> CollisionRun {
    let eps = scene.solver.collision_margin;
    let mut sim = Simulator::new(scene).unwrap();
    let (mut worst_probe, mut deepest_center) = (f32::INFINITY, f32::INFINITY);
    let (mut gap_sum, mut gap_n) = (0.0f64, 0usize);
    for m in motion {
        let (out, _) = sim.step(m).unwrap();
        let head = sim.head();
        let probes = sim
            .collider()
            .probe_points(&sim.state().positions, &sim.state().inv_mass);
        for p in probes {
            worst_probe = worst_probe.min(head.signed_distance(&p).distance - eps);
        }
        for s in &out.hair.splats {
            let sd = head.signed_distance(&s.mu).distance;
            deepest_center = deepest_center.min(sd);
            gap_sum += sd as f64;
            gap_n += 1;
        }
    }
    CollisionRun {
        worst_probe,
        mean_gap: gap_sum / gap_n as f64,
        deepest_center,
    }
}

#[test]
fn criterion_05_proxy_collision_guarantee() {
    let solver = SolverConfig::default();
    let eps = solver.collision_margin;
    let (proxy_scene, motion) = demo(HairStyle::Bob, 200, 10, 300, 300, solver.clone());
    let mut direct_scene = proxy_scene.clone();
    direct_scene.solver.collision = CollisionMode::Direct;
    let proxy = collision_run(&proxy_scene, &motion);
    let direct = collision_run(&direct_scene, &motion);
    let guarantee = proxy.worst_probe >= -1e-4;
    let less_repulsion = proxy.mean_gap < direct.mean_gap;
    let no_deep = proxy.deepest_center >= -eps && direct.deepest_center >= -eps;
    report(
        5,
        guarantee && less_repulsion && no_deep,
        format!(
            "300 frames: min proxy sd−ε = {:.2e} m; mean splat gap proxy {:.5} m vs direct {:.5} m; deepest splat center proxy {:.2e} m, direct {:.2e} m",
            proxy.worst_probe, proxy.mean_gap, direct.mean_gap, proxy.deepest_center, direct.deepest_center
        ),
    );
}

#[test]
fn criterion_06_full_pipeline_identity() {
    let solver = SolverConfig {
        gravity: Vec3::zeros(),
        ..Default::default()
    };
    let (scene, _) = demo(HairStyle::Bob, 150, 10, 1, 300, solver);
    let start = Instant::now();
    let frames = vec![scene.identity_motion(); 50];
    let dir = tempfile::tempdir().unwrap();
    run_sequence(
        &scene,
        &frames,
        dir.path(),
        &RunOptions {
            write_frames: true,
            preview: None,
        },
    )
    .unwrap();
    let mut rest = pose_local_splats(&scene.bald_local, &scene.mesh.vertices, &scene.mesh.faces).unwrap();
    rest.splats.extend(scene.hair.splats.iter().cloned());
    let mut worst = 0.0f32;
    for i in 0..frames.len() {
        let frame = read_splats(&dir.path().join(frame_file_name(i, "ply"))).unwrap();
        assert_eq!(frame.len(), rest.len());
        for (a, b) in frame.splats.iter().zip(&rest.splats) {
            worst = worst.max((a.mu - b.mu).abs().max());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        worst < 1e-5 && secs < 30.0,
        format!(
            "50 identity frames, {} splats each: max position deviation {worst:.2e}, {secs:.2} s",
            rest.len()
        ),
    );
}

#[test]
fn criterion_07_oracle_equivalence() {
    let head = fixtures::synthetic_head(0.1, 2);
    let center = Vec3::new(0.0, 0.14, 0.0);
    let cage = Cage::from_mesh(fixtures::dodecahedron(center, 0.06));
    let cage = mark_roots(&cage, &head, 0.03).unwrap();
    assert_eq!(cage.vertices.len(), 20);
    assert!(cage.kinematic_count() > 0 && cage.free_count() > 0);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hair = SplatSet::global(
        (0..10)
            .map(|_| {
                let mu = center
                    + Vec3::new(
                        rng.random_range(-0.02..0.02),
                        rng.random_range(0.01..0.03),
                        rng.random_range(-0.02..0.02),
                    );
                let mut scale = Vec3::new(0.004, 0.0008, 0.0008);
                scale[rng.random_range(0..3usize)] = 0.006;
                GaussianSplat::new(mu, random_unit_quat(&mut rng), scale, 0.9, Vec3::new(0.2, 0.1, 0.05))
            })
            .collect(),
    );
    let solver = SolverConfig::default();
    let scene = Scene::prepare(
        fixtures::bald_local(&head),
        hair.clone(),
        cage.clone(),
        head.clone(),
        solver.clone(),
    )
    .unwrap();
    let pivot = fixtures::neck_pivot(0.1);
    let transforms: Vec<Mat4> = [0.05f32, 0.12, 0.2]
        .iter()
        .map(|&a| fixtures::rotation_about(pivot, Vec3::new(1.0, 0.3, 0.0), a))
        .collect();
    let motion: Vec<MotionFrame> = transforms
        .iter()
        .map(|t| MotionFrame::Joints([("head".to_string(), *t), ("neck".to_string(), *t)].into()))
        .collect();

    let mut sim = Simulator::new(&scene).unwrap();
    let mut reference = oracle::Oracle::new(&cage, &hair, &solver, &head);
    let mut worst = 0.0f64;
    for (m, t) in motion.iter().zip(&transforms) {
        let (out, _) = sim.step(m).unwrap();
        let (cage_ref, hair_ref) = reference.step(t);
        for (a, b) in sim.state().positions.iter().zip(&cage_ref) {
            worst = worst.max(oracle::max_abs(a, b));
        }
        for (s, r) in out.hair.splats.iter().zip(&hair_ref) {
            worst = worst
                .max(oracle::max_abs(&s.mu, &r.mu))
                .max(oracle::max_abs(&s.scale, &r.scale));
            worst = worst.max(quat_dist(&s.rot, &r.rot) as f64);
        }
    }
    report(
        7,
        worst < 1e-4,
        format!("3 frames, 10 splats, 20 cage vertices: max coordinate deviation from the oracle {worst:.2e}"),
    );
}

#[test]
fn criterion_08_real_time_contract() {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let frames = if cores >= 8 { 300 } else { 20 };
    let (scene, motion) = demo(HairStyle::Bob, 5000, 20, frames, 500, SolverConfig::default());
    assert_eq!(scene.hair.len(), 100_000);
    assert!(scene.cage.vertices.len() <= 500);
    let report_t = run_sequence(&scene, &motion, std::path::Path::new("."), &RunOptions::default()).unwrap();
    let m = report_t.mean_frame();
    let ms = report_t.mean_sim_deform_ms();
    let detail = format!(
        "{} hair splats, {}-vertex cage, {frames} frames on {cores} core(s): simulate {:.2} ms + deform {:.2} ms = {ms:.2} ms/frame (budget 33 ms)",
        scene.hair.len(),
        scene.cage.vertices.len(),
        m.simulate_ms,
        m.deform_ms
    );
    if cores >= 8 {
        report(8, ms <= 33.0, detail);
    } else {
        announce(format!("criterion 8: UNVERIFIED — needs an 8-core machine; {detail}"));
    }
}

#[test]
fn criterion_09_cage_validity() {
    let mut lines = Vec::new();
    let mut pass = true;
    for style in HairStyle::ALL {
        let hair = fixtures::hair_cloud(style, 0.1, 300, 20, 9);
        let (cage, report_c) = build_cage(&hair, &CageOptions::default()).unwrap();
        let mesh = TriMesh::new(cage.vertices.clone(), cage.faces.clone());
        let watertight = mesh.is_watertight();
        let all: Vec<u32> = (0..cage.faces.len() as u32).collect();
        let tree = FaceBvh::build_subset(&cage.vertices, &cage.faces, &all).unwrap();
        let points = tracked_points(&hair);
        let half = 0.5 * report_c.voxel_size;
        let enclosed = points
            .iter()
            .filter(|p| winding_number(&cage.vertices, &cage.faces, p) > 0.5 && tree.closest(p).distance >= half)
            .count();
        let ok = watertight && cage.vertices.len() <= 500 && enclosed == points.len();
        pass &= ok;
        lines.push(format!(
            "{}: {} vertices, watertight {watertight}, {enclosed}/{} endpoints enclosed with ≥ {half:.4} m margin",
            style.name(),
            cage.vertices.len(),
            points.len()
        ));
    }
    report(9, pass, lines.join("; "));
}

#[test]
fn criterion_10_reassignment_fixture() {
    let planted = fixtures::planted_boundary(400, 30, 20, 10);
    let cfg = ReassignConfig {
        boundary_radius: planted.boundary_radius,
        ..Default::default()
    };
    let (boundary, interior) = split_boundary(&planted.hair, &planted.bald, &cfg).unwrap();
    let (kept, expelled) = reassign(&planted.hair, &planted.bald, &boundary, &cfg).unwrap();
    let all_skin_expelled = planted.skin_like.iter().all(|i| expelled.contains(i));
    let kept_idx: Vec<usize> = (0..planted.hair.len()).filter(|i| !expelled.contains(i)).collect();
    let untouched = interior.iter().all(|&i| {
        kept_idx
            .binary_search(&i)
            .map(|k| kept.splats[k] == planted.hair.splats[i])
            .unwrap_or(false)
    });
    report(
        10,
        all_skin_expelled && untouched,
        format!(
            "{}/{} skin-like splats expelled, {} interior splats all unmodified: {untouched}, {} expelled in total",
            planted.skin_like.iter().filter(|i| expelled.contains(i)).count(),
            planted.skin_like.len(),
            interior.len(),
            expelled.len()
        ),
    );
}

/// Straight-line f64 re-implementation of one head-driven frame: rigid root
/// targets, predict / project / velocity substeps, MVC interpolation and
/// principal-axis reconstruction.
mod oracle {
    use super::*;
    use nalgebra::Vector3;

    type V = Vector3<f64>;

    pub fn max_abs(a: &Vec3, b: &V) -> f64 {
        (a.cast::<f64>() - b).abs().max()
    }

    pub struct SplatOut {
        pub mu: V,
        pub scale: V,
        pub rot: Quat,
    }

    pub struct Oracle {
        rest: Vec<V>,
        faces: Vec<[usize; 3]>,
        inv_mass: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
        hinges: Vec<([usize; 4], f64)>,
        /// (vertex, anchor, limit) per free vertex.
        tethers: Vec<(usize, usize, f64)>,
        pos: Vec<V>,
        vel: Vec<V>,
        prev_targets: Vec<V>,
        /// Per splat: source splat, principal weights (+, −), source ends.
        splats: Vec<(GaussianSplat, Vec<f64>, Vec<f64>, V, V)>,
        proxies: Vec<Vec<f64>>,
        head: Vec<[V; 3]>,
        cfg: SolverConfig,
    }

    fn v(p: &Vec3) -> V {
        p.cast::<f64>()
    }

    /// Mean value coordinates from the spherical-triangle closed form.
    pub fn mvc(x: &V, verts: &[V], faces: &[[usize; 3]]) -> Vec<f64> {
        let mut w = vec![0.0; verts.len()];
        let d: Vec<f64> = verts.iter().map(|p| (p - x).norm()).collect();
        let u: Vec<V> = verts.iter().zip(&d).map(|(p, d)| (p - x) / *d).collect();
        for f in faces {
            let theta: Vec<f64> = (0..3)
                .map(|i| 2.0 * ((u[f[(i + 1) % 3]] - u[f[(i + 2) % 3]]).norm() / 2.0).asin())
                .collect();
            let h = theta.iter().sum::<f64>() / 2.0;
            let c: Vec<f64> = (0..3)
                .map(|i| {
                    2.0 * h.sin() * (h - theta[i]).sin() / (theta[(i + 1) % 3].sin() * theta[(i + 2) % 3].sin()) - 1.0
                })
                .collect();
            let det = u[f[0]].dot(&u[f[1]].cross(&u[f[2]]));
            let s: Vec<f64> = c.iter().map(|c| det.signum() * (1.0 - c * c).max(0.0).sqrt()).collect();
            if s.iter().any(|s| s.abs() < 1e-12) {
                continue;
            }
            for i in 0..3 {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                w[f[i]] += (theta[i] - c[i1] * theta[i2] - c[i2] * theta[i1]) / (d[f[i]] * theta[i1].sin() * s[i2]);
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter().map(|x| x / sum).collect()
    }

    fn interp(w: &[f64], pos: &[V]) -> V {
        w.iter().zip(pos).map(|(w, p)| p * *w).sum()
    }

    fn dihedral(p: [V; 4]) -> f64 {
        let [a, b, c, d] = p;
        let e = (b - a).normalize();
        let n1 = (b - a).cross(&(c - a)).normalize();
        let n2 = (a - b).cross(&(d - b)).normalize();
        n1.cross(&n2).dot(&e).atan2(n1.dot(&n2))
    }

    fn wrap(a: f64) -> f64 {
        let t = std::f64::consts::TAU;
        let r = a - t * (a / t).round();
        if r <= -std::f64::consts::PI {
            r + t
        } else {
            r
        }
    }

    /// Central-difference gradient of the dihedral angle.
    fn dihedral_grad(p: [V; 4]) -> [V; 4] {
        let h = 1e-7;
        let mut g = [V::zeros(); 4];
        for (i, gi) in g.iter_mut().enumerate() {
            for k in 0..3 {
                let (mut a, mut b) = (p, p);
                a[i][k] += h;
                b[i][k] -= h;
                gi[k] = wrap(dihedral(a) - dihedral(b)) / (2.0 * h);
            }
        }
        g
    }

    fn transform(t: &Mat4, p: &V) -> V {
        let t = t.cast::<f64>();
        (t * p.push(1.0)).xyz()
    }

    impl Oracle {
        pub fn new(cage: &Cage, hair: &SplatSet, cfg: &SolverConfig, head: &cagehair_core::SkinnedMesh) -> Self {
            let rest: Vec<V> = cage.vertices.iter().map(v).collect();
            let faces: Vec<[usize; 3]> = cage.faces.iter().map(|f| f.map(|i| i as usize)).collect();
            // Unique undirected edges in ascending order, each with the
            // apexes of its two faces.
            let mut edges = Vec::new();
            let mut hinges = Vec::new();
            let mut keys: Vec<(usize, usize)> = faces
                .iter()
                .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
                .collect();
            keys.sort();
            keys.dedup();
            for (a, b) in keys {
                edges.push((a, b, (rest[a] - rest[b]).norm()));
                let apex = |from: usize, to: usize| {
                    let f = faces
                        .iter()
                        .find(|f| (0..3).any(|k| f[k] == from && f[(k + 1) % 3] == to))
                        .expect("closed mesh");
                    *f.iter().find(|&&x| x != from && x != to).unwrap()
                };
                let idx = [a, b, apex(a, b), apex(b, a)];
                hinges.push((idx, dihedral(idx.map(|i| rest[i]))));
            }
            // Edge-path distances to the kinematic set by Bellman–Ford.
            let inv_mass: Vec<f64> = cage.inv_mass.iter().map(|&b| b as f64).collect();
            let mut dist: Vec<(f64, usize)> = (0..rest.len())
                .map(|j| {
                    if inv_mass[j] == 0.0 {
                        (0.0, j)
                    } else {
                        (f64::INFINITY, usize::MAX)
                    }
                })
                .collect();
            for _ in 0..rest.len() {
                for &(a, b, len) in &edges {
                    for (x, y) in [(a, b), (b, a)] {
                        if dist[x].0 + len < dist[y].0 {
                            dist[y] = (dist[x].0 + len, dist[x].1);
                        }
                    }
                }
            }
            let tethers = (0..rest.len())
                .filter(|&j| inv_mass[j] > 0.0 && dist[j].1 != usize::MAX)
                .map(|j| (j, dist[j].1, dist[j].0 as f32 as f64))
                .collect();
            let splats = hair
                .splats
                .iter()
                .map(|s| {
                    let e = endpoints(s);
                    let (plus, minus) = e.principal_ends();
                    let (plus, minus) = (v(&plus), v(&minus));
                    (
                        s.clone(),
                        mvc(&plus, &rest, &faces),
                        mvc(&minus, &rest, &faces),
                        plus,
                        minus,
                    )
                })
                .collect();
            // Proxy of each vertex: the nearest splat center's coordinates.
            let proxies = rest
                .iter()
                .map(|c| {
                    let nearest = hair
                        .splats
                        .iter()
                        .min_by(|a, b| (v(&a.mu) - c).norm().total_cmp(&(v(&b.mu) - c).norm()))
                        .unwrap();
                    mvc(&v(&nearest.mu), &rest, &faces)
                })
                .collect();
            let head = head
                .faces
                .iter()
                .map(|f| f.map(|i| v(&head.vertices[i as usize])))
                .collect();
            Self {
                inv_mass,
                tethers,
                pos: rest.clone(),
                vel: vec![V::zeros(); rest.len()],
                prev_targets: rest.clone(),
                rest,
                faces,
                edges,
                hinges,
                splats,
                proxies,
                head,
                cfg: cfg.clone(),
            }
        }

        fn project_pair(&self, p: &mut [V], idx: &[usize], grads: &[V], c: f64) {
            let denom: f64 = idx
                .iter()
                .zip(grads)
                .map(|(&i, g)| self.inv_mass[i] * g.norm_squared())
                .sum();
            if denom <= 0.0 {
                return;
            }
            let s = -c / denom;
            for (&i, g) in idx.iter().zip(grads) {
                p[i] += g * (s * self.inv_mass[i]);
            }
        }

        /// Distance from `x` to the rigidly moved head surface.
        fn head_distance(&self, t: &Mat4, x: &V) -> f64 {
            let inv = t.cast::<f64>().try_inverse().unwrap();
            let x = (inv * x.push(1.0)).xyz();
            self.head
                .iter()
                .map(|[a, b, c]| {
                    // Sample-based bound is enough: the fixture keeps proxies
                    // centimeters away from the surface.
                    let mut best = f64::INFINITY;
                    for i in 0..=8 {
                        for j in 0..=8 - i {
                            let (u, w) = (i as f64 / 8.0, j as f64 / 8.0);
                            best = best.min((a * (1.0 - u - w) + b * u + c * w - x).norm());
                        }
                    }
                    best
                })
                .fold(f64::INFINITY, f64::min)
        }

        pub fn step(&mut self, t: &Mat4) -> (Vec<V>, Vec<SplatOut>) {
            let n = self.cfg.substeps as usize;
            let dt = self.cfg.dt as f64 / n as f64;
            let g = v(&self.cfg.gravity);
            let targets: Vec<V> = self.rest.iter().map(|p| transform(t, p)).collect();
            for s in 1..=n {
                let a = s as f64 / n as f64;
                let mut p = self.pos.clone();
                for j in 0..p.len() {
                    if self.inv_mass[j] > 0.0 {
                        self.vel[j] = (self.vel[j] + g * (dt * self.inv_mass[j])) * (1.0 - self.cfg.damping as f64);
                        p[j] = self.pos[j] + self.vel[j] * dt;
                    } else {
                        p[j] = self.prev_targets[j] * (1.0 - a) + targets[j] * a;
                    }
                }
                for _ in 0..self.cfg.iterations {
                    for &(i, j, rest) in &self.edges {
                        let d = p[i] - p[j];
                        let n = d.normalize();
                        self.project_pair(&mut p, &[i, j], &[n, -n], d.norm() - rest);
                    }
                    for &(idx, rest) in &self.hinges {
                        let q = idx.map(|i| p[i]);
                        let c = wrap(dihedral(q) - rest);
                        self.project_pair(&mut p, &idx, &dihedral_grad(q), c);
                    }
                    for &(j, a, limit) in &self.tethers {
                        let d = p[j] - p[a];
                        if d.norm() > limit {
                            p[j] = p[a] + d.normalize() * limit;
                        }
                    }
                }
                for (j, w) in self.proxies.iter().enumerate() {
                    if self.inv_mass[j] > 0.0 {
                        let proxy = interp(w, &p);
                        assert!(
                            self.head_distance(t, &proxy) > 0.01,
                            "oracle fixture must stay collision-free"
                        );
                    }
                }
                for j in 0..p.len() {
                    if self.inv_mass[j] > 0.0 {
                        self.vel[j] = (p[j] - self.pos[j]) / dt;
                    }
                }
                self.pos = p;
            }
            self.prev_targets = targets;
            let splats = self
                .splats
                .iter()
                .map(|(s, wp, wm, plus, minus)| {
                    let (dp, dm) = (interp(wp, &self.pos), interp(wm, &self.pos));
                    let (a0, a1) = (plus - minus, dp - dm);
                    let axis = a0.cross(&a1);
                    let angle = axis.norm().atan2(a0.dot(&a1));
                    let dr = if axis.norm() > 1e-15 {
                        nalgebra::UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
                    } else {
                        nalgebra::UnitQuaternion::identity()
                    };
                    let r0 = nalgebra::UnitQuaternion::from_quaternion(s.rot.cast::<f64>());
                    let rot = (dr * r0).into_inner().cast::<f32>();
                    SplatOut {
                        mu: (dp + dm) / 2.0,
                        scale: v(&s.scale) * (a1.norm() / a0.norm()),
                        rot,
                    }
                })
                .collect();
            let _ = &self.faces;
            (self.pos.clone(), splats)
        }
    }
}
