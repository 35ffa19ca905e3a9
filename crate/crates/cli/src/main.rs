//! `cagehair`: cage-driven hair simulation for Gaussian-splat heads.

mod inputs;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cagehair_core::cage::{build_cage, mark_roots};
use cagehair_core::decomposition::{chamfer, reassign, split_boundary, ReassignConfig};
use cagehair_core::engine::{run_sequence, RunOptions};
use cagehair_core::fixtures::{demo_scene, HairStyle};
use cagehair_core::io::{
    read_cage, read_skinned_mesh, read_splats, write_cage, write_motion, write_skinned_mesh, write_splats,
    write_weights, Settings,
};
use cagehair_core::mvc::bake_weights;
use cagehair_core::pbd::collision_penalty;
use cagehair_core::rig::{bind_nearest, MeshBvh};

use inputs::{auto_camera, load_scene, world_splats, SceneArgs, ViewArgs};

#[derive(Parser, Debug)]
#[command(
    name = "cagehair",
    version,
    about = "Cage-driven PBD hair simulation for Gaussian-splat heads"
)]
struct Cli {
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    command: Command,
}

/// Settings overrides; applied on top of `--config`.
#[derive(Args, Debug, Default)]
struct Tuning {
    /// `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Frame interval in seconds.
    #[arg(long, global = true)]
    dt: Option<String>,
    #[arg(long, global = true)]
    substeps: Option<String>,
    #[arg(long, global = true)]
    iterations: Option<String>,
    /// Gravity vector, "x,y,z".
    #[arg(long, global = true, allow_hyphen_values = true)]
    gravity: Option<String>,
    #[arg(long, global = true)]
    damping: Option<String>,
    #[arg(long, global = true)]
    stretch_compliance: Option<String>,
    #[arg(long, global = true)]
    bend_compliance: Option<String>,
    /// Collision margin in meters.
    #[arg(long, global = true)]
    margin: Option<String>,
    /// Cage voxel size in meters, or "auto".
    #[arg(long, global = true)]
    voxel_size: Option<String>,
    #[arg(long, global = true)]
    dilation: Option<String>,
    #[arg(long, global = true)]
    target_verts: Option<String>,
    #[arg(long, global = true)]
    root_radius: Option<String>,
    #[arg(long, global = true)]
    boundary_radius: Option<String>,
}

impl Tuning {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::read(p)?,
            None => Settings::default(),
        };
        let pairs = [
            ("dt", &self.dt),
            ("substeps", &self.substeps),
            ("iterations", &self.iterations),
            ("gravity", &self.gravity),
            ("damping", &self.damping),
            ("stretch_compliance", &self.stretch_compliance),
            ("bend_compliance", &self.bend_compliance),
            ("collision_margin", &self.margin),
            ("voxel_size", &self.voxel_size),
            ("dilation", &self.dilation),
            ("target_verts", &self.target_verts),
            ("root_radius", &self.root_radius),
            ("boundary_radius", &self.boundary_radius),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v).map_err(anyhow::Error::msg)?;
            }
        }
        s.solver.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic head, bald and hair splats, and a nodding motion.
    MakeFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bob")]
        style: String,
        #[arg(long, default_value_t = 200)]
        strands: usize,
        #[arg(long, default_value_t = 10)]
        per_strand: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Build a watertight cage around the hair (and root it if a mesh is given).
    BuildCage {
        #[arg(long)]
        hair: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Head mesh with scalp faces; marks roots when given.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Mark cage vertices near the scalp as kinematic roots.
    MarkRoots {
        #[arg(long)]
        cage: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bake the MVC weight cache for hair inside a cage.
    BindWeights {
        #[arg(long)]
        hair: PathBuf,
        #[arg(long)]
        cage: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bind world-space bald splats to their nearest mesh triangles.
    RigBald {
        #[arg(long)]
        bald: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a motion sequence and write one splat file per frame.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write a PNG preview per frame.
        #[arg(long)]
        preview: bool,
        #[command(flatten)]
        view: ViewArgs,
    },
    /// Time the per-frame stages without writing frames.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Move boundary hair splats that look like skin out of the hair set.
    Reassign {
        #[arg(long)]
        hair: PathBuf,
        /// Bald splats; triangle-local sets need `--mesh`.
        #[arg(long)]
        bald: PathBuf,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        color_weight: f32,
        #[arg(long, default_value_t = 1.0)]
        scale_weight: f32,
    },
    /// Symmetric Chamfer distance between two splat sets' centers.
    Chamfer { a: PathBuf, b: PathBuf },
    /// Mean collision penalty of splat centers against a mesh.
    Penalty {
        #[arg(long)]
        splats: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Render an inspection preview of a splat file.
    Preview {
        #[arg(long)]
        splats: PathBuf,
        /// Needed to pose triangle-local splats.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = cli.tuning.settings()?;
    match cli.command {
        Command::MakeFixture {
            out,
            style,
            strands,
            per_strand,
            frames,
            seed,
        } => {
            let style = HairStyle::parse(&style).with_context(|| format!("unknown style {style:?}"))?;
            let demo = demo_scene(style, strands, per_strand, frames, seed);
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            write_skinned_mesh(&out.join("head.obj"), &demo.mesh)?;
            write_splats(&out.join("bald.ply"), &demo.bald)?;
            write_splats(&out.join("hair.ply"), &demo.hair)?;
            write_motion(&out.join("motion.json"), &demo.motion)?;
            println!(
                "wrote {}: {} bald, {} hair splats, {} frames",
                out.display(),
                demo.bald.len(),
                demo.hair.len(),
                demo.motion.len()
            );
        }
        Command::BuildCage { hair, out, mesh } => {
            let hair = read_splats(&hair)?;
            let (mut cage, report) = build_cage(&hair, &settings.cage_options())?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            if let Some(mesh) = mesh {
                cage = mark_roots(&cage, &read_skinned_mesh(&mesh)?, settings.root_radius)?;
            }
            write_cage(&out, &cage)?;
            println!(
                "cage: {} vertices, {} faces, {} roots (voxel {:.5} m, dilation {})",
                cage.vertices.len(),
                cage.faces.len(),
                cage.kinematic_count(),
                report.voxel_size,
                report.dilation
            );
        }
        Command::MarkRoots { cage, mesh, out } => {
            let cage = mark_roots(&read_cage(&cage)?, &read_skinned_mesh(&mesh)?, settings.root_radius)?;
            write_cage(&out, &cage)?;
            println!("roots: {} of {}", cage.kinematic_count(), cage.vertices.len());
        }
        Command::BindWeights { hair, cage, out } => {
            let hair = read_splats(&hair)?;
            let cage = read_cage(&cage)?;
            let weights = bake_weights(&hair, &cage.vertices, &cage.faces)?;
            write_weights(&out, &weights)?;
            println!(
                "weights: {} splats x {} cage vertices ({})",
                weights.n_splats(),
                weights.n_cage_verts(),
                if weights.is_sparse() { "sparse" } else { "dense" }
            );
        }
        Command::RigBald { bald, mesh, out } => {
            let local = bind_nearest(&read_splats(&bald)?, &read_skinned_mesh(&mesh)?)?;
            write_splats(&out, &local)?;
            println!("rigged {} splats", local.len());
        }
        Command::Simulate {
            scene,
            out,
            preview,
            view,
        } => {
            let (scene, motion) = load_scene(&scene, &settings)?;
            let camera = if preview {
                Some(auto_camera(&scene, &view)?)
            } else {
                None
            };
            let report = run_sequence(
                &scene,
                &motion,
                &out,
                &RunOptions {
                    write_frames: true,
                    preview: camera,
                },
            )?;
            println!("wrote {} frames to {}", report.frames.len(), out.display());
            print!("{}", report.summary());
        }
        Command::Bench { scene } => {
            let (scene, motion) = load_scene(&scene, &settings)?;
            println!(
                "scene: {} hair splats, {} bald splats, {} cage vertices ({} roots)",
                scene.hair.len(),
                scene.bald_local.len(),
                scene.cage.vertices.len(),
                scene.cage.kinematic_count()
            );
            let report = run_sequence(&scene, &motion, std::path::Path::new("."), &RunOptions::default())?;
            print!("{}", report.summary());
        }
        Command::Reassign {
            hair,
            bald,
            mesh,
            out,
            color_weight,
            scale_weight,
        } => {
            let hair = read_splats(&hair)?;
            let bald = world_splats(read_splats(&bald)?, mesh.as_deref())?;
            let cfg = ReassignConfig {
                boundary_radius: settings.boundary_radius,
                color_weight,
                scale_weight,
            };
            let (boundary, _) = split_boundary(&hair, &bald, &cfg)?;
            let (kept, expelled) = reassign(&hair, &bald, &boundary, &cfg)?;
            write_splats(&out, &kept)?;
            println!(
                "boundary: {}, moved to bald: {}, hair kept: {}",
                boundary.len(),
                expelled.len(),
                kept.len()
            );
        }
        Command::Chamfer { a, b } => {
            let d = chamfer(&read_splats(&a)?.positions(), &read_splats(&b)?.positions())?;
            println!("chamfer: {d:.9e}");
        }
        Command::Penalty { splats, mesh } => {
            let mesh = read_skinned_mesh(&mesh)?;
            let splats = read_splats(&splats)?;
            if splats.is_empty() {
                bail!("no splats");
            }
            let bvh = MeshBvh::build(&mesh.vertices, &mesh.faces)?;
            let p = collision_penalty(&splats.positions(), &bvh, settings.solver.collision_margin);
            println!("penalty: {p:.9e}");
        }
        Command::Preview {
            splats,
            mesh,
            out,
            view,
        } => {
            let set = world_splats(read_splats(&splats)?, mesh.as_deref())?;
            let camera = view.camera_for(&set)?;
            cagehair_core::engine::preview_project(&set, &camera).save_png(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
