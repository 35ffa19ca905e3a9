use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cagehair_bench::bob_scene;
use cagehair_core::cage::build_cage;
use cagehair_core::deform::DeformPlan;
use cagehair_core::engine::Simulator;
use cagehair_core::mvc::{bake_weights, CageSoa};
use cagehair_core::pbd::{build_constraints, predict, project_constraints, update_velocities, SolverState};

fn stages(c: &mut Criterion) {
    let (scene, motion) = bob_scene(500, 500, 30);
    let mut g = c.benchmark_group("stages");
    g.sample_size(10).measurement_time(Duration::from_secs(5));

    g.bench_function("build_cage_10k", |b| {
        b.iter(|| build_cage(&scene.hair, &Default::default()).unwrap())
    });
    g.bench_function("bake_weights_10k", |b| {
        b.iter(|| bake_weights(&scene.hair, &scene.cage.vertices, &scene.cage.faces).unwrap())
    });

    let constraints = build_constraints(&scene.cage, &scene.solver).unwrap();
    let sim = Simulator::new(&scene).unwrap();
    let collider = sim.collider();
    let dt = scene.solver.substep_dt();
    g.bench_function("substep_500_verts", |b| {
        b.iter_batched(
            || SolverState::new(&scene.cage, &constraints),
            |mut state| {
                predict(&mut state, scene.solver.gravity, scene.solver.damping, dt, None);
                project_constraints(&mut state, &constraints, Some(&collider), scene.solver.iterations, dt);
                update_velocities(&mut state, dt);
                state
            },
            BatchSize::SmallInput,
        )
    });

    let plan = DeformPlan::new(&scene.hair).unwrap();
    let cage = CageSoa::new(&scene.cage.vertices);
    let mut out = Vec::new();
    g.bench_function("deform_10k", |b| {
        b.iter(|| plan.deform_into(&scene.hair, &scene.weights, &cage, &mut out).unwrap())
    });

    g.bench_function("frame_10k", |b| {
        let mut sim = Simulator::new(&scene).unwrap();
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % motion.len();
            sim.step(&motion[i]).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
