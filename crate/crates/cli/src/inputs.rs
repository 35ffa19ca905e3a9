//! Scene loading and camera setup shared by several subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use cagehair_core::engine::{Camera, Scene};
use cagehair_core::fixtures::{demo_scene, HairStyle};
use cagehair_core::io::{
    parse_vec3, read_cage, read_motion, read_skinned_mesh, read_splats, read_weights, write_weights, Settings,
};
use cagehair_core::mesh::bounds;
use cagehair_core::rig::pose_local_splats;
use cagehair_core::{MotionFrame, SplatFrame, SplatSet, Vec3};

/// Either `--fixture STYLE` or the four scene files.
#[derive(Args, Debug)]
pub struct SceneArgs {
    /// Use the built-in demo scene with this hair style (bob, ponytail, curly).
    #[arg(long, conflicts_with_all = ["bald", "hair", "mesh", "motion", "cage", "weights"])]
    pub fixture: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub strands: usize,
    #[arg(long, default_value_t = 10)]
    pub per_strand: usize,
    /// Bald splats, world-space or triangle-local.
    #[arg(long)]
    pub bald: Option<PathBuf>,
    #[arg(long)]
    pub hair: Option<PathBuf>,
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub motion: Option<PathBuf>,
    /// Prebuilt cage; built from the hair when omitted.
    #[arg(long)]
    pub cage: Option<PathBuf>,
    /// Weight cache: read when present, written otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Use only the first N motion frames (fixture: exactly N frames).
    #[arg(long)]
    pub frames: Option<usize>,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .with_context(|| format!("--{flag} is required unless --fixture is given"))
}

pub fn load_scene(args: &SceneArgs, settings: &Settings) -> Result<(Scene, Vec<MotionFrame>)> {
    if let Some(style) = &args.fixture {
        let style = HairStyle::parse(style).with_context(|| format!("unknown style {style:?}"))?;
        let demo = demo_scene(style, args.strands, args.per_strand, args.frames.unwrap_or(30), 7);
        let (scene, _) = Scene::assemble(demo.bald, demo.hair, demo.mesh, None, settings)?;
        return Ok((scene, demo.motion));
    }
    let bald = read_splats(required(&args.bald, "bald")?)?;
    let hair = read_splats(required(&args.hair, "hair")?)?;
    let mesh = read_skinned_mesh(required(&args.mesh, "mesh")?)?;
    let mut motion = read_motion(required(&args.motion, "motion")?)?;
    if let Some(n) = args.frames {
        motion.truncate(n);
    }
    let cage = args.cage.as_deref().map(read_cage).transpose()?;
    let scene = match (&args.weights, &cage) {
        (Some(w), Some(cage)) if w.exists() => {
            let weights = read_weights(w)?;
            let bald = match bald.frame {
                SplatFrame::Global => cagehair_core::rig::bind_nearest(&bald, &mesh)?,
                SplatFrame::TriangleLocal => bald,
            };
            let cage = if cage.kinematic_count() == 0 {
                cagehair_core::cage::mark_roots(cage, &mesh, settings.root_radius)?
            } else {
                cage.clone()
            };
            Scene::with_weights(bald, hair, cage, weights, mesh, settings.solver.clone())?
        }
        _ => {
            let (scene, _) = Scene::assemble(bald, hair, mesh, cage, settings)?;
            if let Some(w) = &args.weights {
                write_weights(w, &scene.weights)?;
            }
            scene
        }
    };
    Ok((scene, motion))
}

/// Poses a triangle-local set at the rest mesh; global sets pass through.
pub fn world_splats(set: SplatSet, mesh: Option<&Path>) -> Result<SplatSet> {
    match set.frame {
        SplatFrame::Global => Ok(set),
        SplatFrame::TriangleLocal => {
            let Some(mesh) = mesh else {
                bail!("triangle-local splats need --mesh");
            };
            let mesh = read_skinned_mesh(mesh)?;
            Ok(pose_local_splats(&set, &mesh.vertices, &mesh.faces)?)
        }
    }
}

/// Preview camera; by default it looks at the splats' bounding-box center
/// from the +z side.
#[derive(Args, Debug)]
pub struct ViewArgs {
    #[arg(long, default_value_t = 512)]
    pub width: u32,
    #[arg(long, default_value_t = 512)]
    pub height: u32,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 40.0)]
    pub fov: f32,
    /// Camera position "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    pub eye: Option<String>,
    /// Look-at point "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
}

impl ViewArgs {
    pub fn camera_for(&self, set: &SplatSet) -> Result<Camera> {
        let points = set.positions();
        if points.is_empty() {
            bail!("no splats to frame");
        }
        let (lo, hi) = bounds(&points);
        let vec = |s: &Option<String>, default: Vec3| -> Result<Vec3> {
            match s {
                Some(s) => parse_vec3(s).with_context(|| format!("cannot parse {s:?} as x,y,z")),
                None => Ok(default),
            }
        };
        let target = vec(&self.target, (lo + hi) * 0.5)?;
        let radius = 0.5 * (hi - lo).norm().max(1e-3);
        let distance = radius / (0.5 * self.fov.to_radians()).tan() * 1.1;
        let eye = vec(&self.eye, target + Vec3::new(0.0, 0.0, distance))?;
        let camera = Camera::look_at(eye, target, Vec3::y(), self.fov.to_radians(), self.width, self.height);
        camera.validate()?;
        Ok(camera)
    }
}

/// Camera framing the scene at rest (bald and hair).
pub fn auto_camera(scene: &Scene, view: &ViewArgs) -> Result<Camera> {
    let mut set = pose_local_splats(&scene.bald_local, &scene.mesh.vertices, &scene.mesh.faces)?;
    set.splats.extend(scene.hair.splats.iter().cloned());
    view.camera_for(&set)
}
