//! Shared scene setup for the benchmarks.

use cagehair_core::engine::Scene;
use cagehair_core::fixtures::{demo_scene, HairStyle};
use cagehair_core::io::Settings;
use cagehair_core::MotionFrame;

/// Demo bob scene with `strands × 20` hair splats and a cage of at most
/// `cage_vertices` vertices, plus `frames` frames of nodding.
pub fn bob_scene(strands: usize, cage_vertices: usize, frames: usize) -> (Scene, Vec<MotionFrame>) {
    let demo = demo_scene(HairStyle::Bob, strands, 20, frames, 7);
    let settings = Settings {
        target_verts: cage_vertices,
        ..Default::default()
    };
    let (scene, _) = Scene::assemble(demo.bald, demo.hair, demo.mesh, None, &settings).expect("demo scene assembles");
    (scene, demo.motion)
}
