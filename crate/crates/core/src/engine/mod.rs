//! Per-frame orchestration: pose the head, drive the cage roots, simulate
//! the free cage vertices, and rebuild the hair from the deformed cage.

mod preview;
mod sequence;

pub use preview::{preview_project, Camera, PreviewImage};
pub use sequence::{frame_file_name, run_sequence, FrameTiming, RunOptions, TimingReport};

use std::time::{Duration, Instant};

use crate::cage::{build_cage, mark_roots, Cage, CageReport, RootRig};
use crate::deform::DeformPlan;
use crate::error::{Error, Result};
use crate::io::Settings;
use crate::mvc::{bake_weights, bind_proxies, CageSoa, MvcWeights, ProxyBinding};
use crate::pbd::{
    build_constraints, predict, project_constraints, update_velocities, Collider, ConstraintSet, SolverState,
};
use crate::rig::{bind_nearest, face_frames, lbs_pose, MeshBvh};
use crate::types::{GaussianSplat, MotionFrame, SkinnedMesh, SolverConfig, SplatFrame, SplatSet, Vec3};

/// Everything needed to animate one head of hair.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Bald-head splats in triangle-local frames of `mesh`.
    pub bald_local: SplatSet,
    /// Hair splats in world space at the rest pose.
    pub hair: SplatSet,
    pub cage: Cage,
    pub weights: MvcWeights,
    /// One per cage vertex.
    pub proxies: Vec<ProxyBinding>,
    pub mesh: SkinnedMesh,
    pub solver: SolverConfig,
}

impl Scene {
    /// Bakes the cage weights and proxy bindings for `hair`.
    pub fn prepare(
        bald_local: SplatSet,
        hair: SplatSet,
        cage: Cage,
        mesh: SkinnedMesh,
        solver: SolverConfig,
    ) -> Result<Self> {
        let weights = bake_weights(&hair, &cage.vertices, &cage.faces)?;
        Self::with_weights(bald_local, hair, cage, weights, mesh, solver)
    }

    /// Like [`Scene::prepare`] with previously baked (e.g. cached) weights.
    pub fn with_weights(
        bald_local: SplatSet,
        hair: SplatSet,
        cage: Cage,
        weights: MvcWeights,
        mesh: SkinnedMesh,
        solver: SolverConfig,
    ) -> Result<Self> {
        if weights.n_splats() != hair.len() || weights.n_cage_verts() != cage.vertices.len() {
            return Err(Error::CountMismatch {
                what: "weight matrix splats x cage vertices",
                expected: hair.len() * cage.vertices.len(),
                got: weights.n_splats() * weights.n_cage_verts(),
            });
        }
        let proxies = bind_proxies(&cage.vertices, &hair, &weights)?;
        let scene = Self {
            bald_local,
            hair,
            cage,
            weights,
            proxies,
            mesh,
            solver,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Full preprocessing from raw inputs: rigs a global `bald` set to the
    /// mesh, builds and roots a cage when none is given (or roots a given
    /// cage that has no kinematic vertices), then bakes weights.
    pub fn assemble(
        bald: SplatSet,
        hair: SplatSet,
        mesh: SkinnedMesh,
        cage: Option<Cage>,
        settings: &Settings,
    ) -> Result<(Self, Option<CageReport>)> {
        let bald_local = match bald.frame {
            SplatFrame::Global => bind_nearest(&bald, &mesh)?,
            SplatFrame::TriangleLocal => bald,
        };
        let (cage, report) = match cage {
            Some(c) => (c, None),
            None => {
                let (c, r) = build_cage(&hair, &settings.cage_options())?;
                (c, Some(r))
            }
        };
        let cage = if cage.kinematic_count() == 0 {
            mark_roots(&cage, &mesh, settings.root_radius)?
        } else {
            cage
        };
        let scene = Self::prepare(bald_local, hair, cage, mesh, settings.solver.clone())?;
        Ok((scene, report))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.mesh.validate()?;
        self.cage.validate()?;
        if self.hair.frame != SplatFrame::Global {
            return Err(Error::invalid("hair", "must be a global set"));
        }
        if self.bald_local.frame != SplatFrame::TriangleLocal {
            return Err(Error::invalid("bald_local", "must be a triangle-local set"));
        }
        for (index, s) in self.bald_local.splats.iter().enumerate() {
            match s.binding {
                None => return Err(Error::MissingBinding { index }),
                Some(b) if b as usize >= self.mesh.faces.len() => {
                    return Err(Error::IndexOutOfRange {
                        what: "bald binding",
                        index: b as usize,
                        len: self.mesh.faces.len(),
                    })
                }
                _ => {}
            }
        }
        let m = self.cage.vertices.len();
        if self.weights.n_splats() != self.hair.len() {
            return Err(Error::CountMismatch {
                what: "weight splats",
                expected: self.hair.len(),
                got: self.weights.n_splats(),
            });
        }
        if self.weights.n_cage_verts() != m {
            return Err(Error::CountMismatch {
                what: "weight cage vertices",
                expected: m,
                got: self.weights.n_cage_verts(),
            });
        }
        if self.proxies.len() != m {
            return Err(Error::CountMismatch {
                what: "proxy bindings",
                expected: m,
                got: self.proxies.len(),
            });
        }
        for p in &self.proxies {
            if p.weight_row.len() != m {
                return Err(Error::CountMismatch {
                    what: "proxy weight row",
                    expected: m,
                    got: p.weight_row.len(),
                });
            }
            if p.source_splat as usize >= self.hair.len() {
                return Err(Error::IndexOutOfRange {
                    what: "proxy source splat",
                    index: p.source_splat as usize,
                    len: self.hair.len(),
                });
            }
        }
        for (j, a) in self.cage.root_anchor.iter().enumerate() {
            if let (Some(a), 0.0) = (a, self.cage.inv_mass[j]) {
                if a.face as usize >= self.mesh.faces.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "root anchor face",
                        index: a.face as usize,
                        len: self.mesh.faces.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Neutral pose of every joint.
    pub fn identity_motion(&self) -> MotionFrame {
        MotionFrame::identity(&self.mesh.joints)
    }
}

/// Bald and hair splats of one frame, both in world space.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub bald: SplatSet,
    pub hair: SplatSet,
}

impl FrameOutput {
    /// `bald ∪ hair`, bald first.
    pub fn merged(&self) -> SplatSet {
        let mut splats = Vec::with_capacity(self.bald.len() + self.hair.len());
        splats.extend(self.bald.splats.iter().cloned());
        splats.extend(self.hair.splats.iter().cloned());
        SplatSet::global(splats)
    }
}

/// Wall time of the stages of one [`Simulator::step`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub pose: Duration,
    pub simulate: Duration,
    pub deform: Duration,
}

/// Stateful frame stepper over a borrowed [`Scene`].
#[derive(Debug)]
pub struct Simulator<'a> {
    scene: &'a Scene,
    constraints: ConstraintSet,
    state: SolverState,
    bvh: MeshBvh,
    roots: RootRig,
    posed: Vec<Vec3>,
    prev_targets: Vec<Vec3>,
    next_targets: Vec<Vec3>,
    substep_targets: Vec<Vec3>,
    plan: DeformPlan,
    soa: CageSoa,
    hair_out: Vec<GaussianSplat>,
    frames: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(scene: &'a Scene) -> Result<Self> {
        scene.validate()?;
        let constraints = build_constraints(&scene.cage, &scene.solver)?;
        let state = SolverState::new(&scene.cage, &constraints);
        Ok(Self {
            bvh: MeshBvh::build(&scene.mesh.vertices, &scene.mesh.faces)?,
            roots: RootRig::new(&scene.cage, &scene.mesh.vertices, &scene.mesh.faces)?,
            posed: scene.mesh.vertices.clone(),
            prev_targets: scene.cage.vertices.clone(),
            next_targets: scene.cage.vertices.clone(),
            substep_targets: scene.cage.vertices.clone(),
            plan: DeformPlan::new(&scene.hair)?,
            soa: CageSoa::new(&scene.cage.vertices),
            hair_out: Vec::with_capacity(scene.hair.len()),
            constraints,
            state,
            scene,
            frames: 0,
        })
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Head mesh hierarchy at the last posed frame.
    pub fn head(&self) -> &MeshBvh {
        &self.bvh
    }

    /// Posed head vertices of the last frame.
    pub fn posed_vertices(&self) -> &[Vec3] {
        &self.posed
    }

    pub fn frames_done(&self) -> usize {
        self.frames
    }

    /// Collision settings of the scene against the current head.
    pub fn collider(&self) -> Collider<'_> {
        Collider {
            bvh: &self.bvh,
            proxies: &self.scene.proxies,
            mode: self.scene.solver.collision,
            margin: self.scene.solver.collision_margin,
        }
    }

    /// Advances one frame.
    pub fn step(&mut self, motion: &MotionFrame) -> Result<(FrameOutput, StageTimes)> {
        let scene = self.scene;
        let cfg = &scene.solver;
        let t0 = Instant::now();

        motion.validate()?;
        self.posed = lbs_pose(&scene.mesh, motion)?;
        let bald = pose_bald(&scene.bald_local, &self.posed, &scene.mesh.faces);
        self.bvh.refit(&self.posed)?;
        match self
            .roots
            .targets(&self.posed, &scene.mesh.faces, &mut self.next_targets)
        {
            Ok(()) => {}
            // A collapsed scalp face holds its roots where they were.
            Err(Error::DegenerateFace { .. }) => self.next_targets.clone_from(&self.prev_targets),
            Err(e) => return Err(e),
        }
        let t1 = Instant::now();

        let n = cfg.substeps;
        let dt = cfg.substep_dt();
        for s in 1..=n {
            if s == n {
                self.substep_targets.clone_from(&self.next_targets);
            } else {
                let a = s as f32 / n as f32;
                for j in self.roots.vertices() {
                    self.substep_targets[j] = self.prev_targets[j] * (1.0 - a) + self.next_targets[j] * a;
                }
            }
            predict(
                &mut self.state,
                cfg.gravity,
                cfg.damping,
                dt,
                Some(&self.substep_targets),
            );
            let collider = Collider {
                bvh: &self.bvh,
                proxies: &scene.proxies,
                mode: cfg.collision,
                margin: cfg.collision_margin,
            };
            project_constraints(&mut self.state, &self.constraints, Some(&collider), cfg.iterations, dt);
            update_velocities(&mut self.state, dt);
        }
        self.prev_targets.clone_from(&self.next_targets);
        let t2 = Instant::now();

        self.soa.update(&self.state.positions);
        self.plan
            .deform_into(&scene.hair, &scene.weights, &self.soa, &mut self.hair_out)?;
        let hair = SplatSet::global(self.hair_out.clone());
        let t3 = Instant::now();

        self.frames += 1;
        Ok((
            FrameOutput { bald, hair },
            StageTimes {
                pose: t1 - t0,
                simulate: t2 - t1,
                deform: t3 - t2,
            },
        ))
    }
}

/// Places bald splats on the posed mesh; splats on collapsed faces are
/// muted at the face centroid for this frame.
fn pose_bald(local: &SplatSet, posed: &[Vec3], faces: &[[u32; 3]]) -> SplatSet {
    let frames = face_frames(posed, faces);
    let splats = local
        .splats
        .iter()
        .map(|s| {
            let b = s.binding.expect("validated binding") as usize;
            match &frames[b] {
                Some(frame) => {
                    let mut g = crate::rig::local_to_global_unchecked(s, frame);
                    g.binding = None;
                    g
                }
                None => {
                    let f = faces[b];
                    let c = (posed[f[0] as usize] + posed[f[1] as usize] + posed[f[2] as usize]) / 3.0;
                    GaussianSplat {
                        mu: c,
                        opacity: 0.0,
                        binding: None,
                        ..s.clone()
                    }
                }
            }
        })
        .collect();
    SplatSet::global(splats)
}

/// Runs `frames` through a fresh simulator and returns every frame.
pub fn simulate(scene: &Scene, frames: &[MotionFrame]) -> Result<Vec<FrameOutput>> {
    let mut sim = Simulator::new(scene)?;
    frames.iter().map(|m| sim.step(m).map(|(out, _)| out)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cage::CageOptions;
    use crate::fixtures::{self, HairStyle};
    use crate::types::CollisionMode;

    fn small_scene(gravity: Vec3) -> Scene {
        let head = fixtures::synthetic_head(0.1, 2);
        let hair = fixtures::hair_cloud(HairStyle::Bob, 0.1, 40, 6, 3);
        let (cage, _) = build_cage(
            &hair,
            &CageOptions {
                target_vertices: 120,
                ..Default::default()
            },
        )
        .unwrap();
        let cage = mark_roots(&cage, &head, 0.04).unwrap();
        let bald = fixtures::bald_local(&head);
        let solver = SolverConfig {
            gravity,
            ..Default::default()
        };
        Scene::prepare(bald, hair, cage, head, solver).unwrap()
    }

    #[test]
    fn identity_motion_reproduces_rest() {
        let scene = small_scene(Vec3::zeros());
        let frames = vec![scene.identity_motion(); 5];
        let out = simulate(&scene, &frames).unwrap();
        for f in &out {
            for (a, b) in f.hair.splats.iter().zip(&scene.hair.splats) {
                assert!((a.mu - b.mu).norm() < 1e-5, "{:?} vs {:?}", a.mu, b.mu);
            }
            assert_eq!(f.bald.len(), scene.bald_local.len());
        }
    }

    #[test]
    fn kinematic_vertices_track_targets_exactly() {
        let scene = small_scene(Vec3::new(0.0, -9.8, 0.0));
        let mut sim = Simulator::new(&scene).unwrap();
        let motion = fixtures::nod_motion(0.1, 4, 0.3, 4.0);
        let rig = RootRig::new(&scene.cage, &scene.mesh.vertices, &scene.mesh.faces).unwrap();
        for m in &motion {
            sim.step(m).unwrap();
            let mut t = scene.cage.vertices.clone();
            rig.targets(sim.posed_vertices(), &scene.mesh.faces, &mut t).unwrap();
            for j in rig.vertices() {
                assert_eq!(sim.state().positions[j], t[j]);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let scene = small_scene(Vec3::new(0.0, -9.8, 0.0));
        let motion = fixtures::nod_motion(0.1, 3, 0.3, 3.0);
        assert_eq!(simulate(&scene, &motion).unwrap(), simulate(&scene, &motion).unwrap());
    }

    #[test]
    fn validation_catches_mismatches() {
        let mut scene = small_scene(Vec3::zeros());
        scene.proxies.pop();
        assert!(Simulator::new(&scene).is_err());
        let mut scene = small_scene(Vec3::zeros());
        scene.solver.collision = CollisionMode::Off;
        scene.hair.splats.pop();
        assert!(scene.validate().is_err());
    }
}
