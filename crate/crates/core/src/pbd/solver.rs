//! Substep integration: prediction, constraint projection with head
//! collision, and finite-difference velocities.

use crate::cage::Cage;
use crate::mvc::ProxyBinding;
use crate::rig::MeshBvh;
use crate::types::{CollisionMode, Vec3};

use super::constraints::ConstraintSet;

/// Proxy weight below which the collision push is no longer amplified.
pub const MIN_PROXY_SELF_WEIGHT: f32 = 0.1;
/// Extra collision-only sweeps run after the constraint iterations.
pub const CLEANUP_SWEEPS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Current positions `c_j`.
    pub positions: Vec<Vec3>,
    /// Predicted positions `p_j`.
    pub predicted: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub inv_mass: Vec<f32>,
    /// XPBD multipliers in [`ConstraintSet`] order.
    pub lambdas: Vec<f32>,
    pub time: f64,
}

impl SolverState {
    pub fn new(cage: &Cage, constraints: &ConstraintSet) -> Self {
        Self {
            positions: cage.vertices.clone(),
            predicted: cage.vertices.clone(),
            velocities: cage.velocities.clone(),
            inv_mass: cage.inv_mass.clone(),
            lambdas: vec![0.0; constraints.len()],
            time: 0.0,
        }
    }

    /// `Σ ½ m |v|²` over free vertices.
    pub fn kinetic_energy(&self) -> f64 {
        self.velocities
            .iter()
            .zip(&self.inv_mass)
            .filter(|(_, &b)| b > 0.0)
            .map(|(v, &b)| 0.5 * v.norm_squared() as f64 / b as f64)
            .sum()
    }
}

/// Semi-implicit Euler prediction. Kinematic vertices jump to `targets`
/// (or stay put when `None`); multipliers are reset.
pub fn predict(state: &mut SolverState, gravity: Vec3, damping: f32, dt: f32, targets: Option<&[Vec3]>) {
    state.lambdas.iter_mut().for_each(|l| *l = 0.0);
    let keep = 1.0 - damping;
    for j in 0..state.positions.len() {
        let c = state.positions[j];
        let beta = state.inv_mass[j];
        if beta > 0.0 {
            let v = (state.velocities[j] + gravity * (dt * beta)) * keep;
            state.velocities[j] = v;
            state.predicted[j] = c + v * dt;
        } else {
            let t = targets.map_or(c, |t| t[j]);
            state.velocities[j] = (t - c) / dt;
            state.predicted[j] = t;
        }
    }
}

/// Head mesh and collision settings for [`project_constraints`].
#[derive(Debug, Clone, Copy)]
pub struct Collider<'a> {
    pub bvh: &'a MeshBvh,
    /// One binding per cage vertex; only read in proxy mode.
    pub proxies: &'a [ProxyBinding],
    pub mode: CollisionMode,
    pub margin: f32,
}

/// Absolute allowance (meters) for f32 rounding in the skip test.
const SKIP_SLACK: f32 = 1e-5;

/// Skips signed-distance queries that cannot report a penetration.
///
/// Signed distance is 1-Lipschitz and a probe moves by at most
/// `‖row‖₁ · max_m ‖Δp_m‖`, so a probe whose last clearance exceeds that
/// bound is still clear. Displacements are measured against the positions
/// at the start of the projection, which gives `R_now + R_then` as the
/// bound on movement since the last query.
struct ProbeCache {
    /// `sd − margin` at the last query; `−∞` before the first.
    clearance: Vec<f32>,
    /// `radius` at the last query.
    radius_at: Vec<f32>,
    /// L1 norm of the probe's weight row.
    gain: Vec<f32>,
    reference: Vec<Vec3>,
    /// Running max of `‖p_m − reference_m‖`.
    radius: f32,
}

impl ProbeCache {
    fn new(predicted: &[Vec3]) -> Self {
        let m = predicted.len();
        Self {
            clearance: vec![f32::NEG_INFINITY; m],
            radius_at: vec![0.0; m],
            gain: vec![1.0; m],
            reference: predicted.to_vec(),
            radius: 0.0,
        }
    }

    fn grow(&mut self, j: usize, p: &Vec3) {
        self.radius = self.radius.max((p - self.reference[j]).norm());
    }

    fn grow_all(&mut self, predicted: &[Vec3]) {
        for (j, p) in predicted.iter().enumerate() {
            self.grow(j, p);
        }
    }

    fn may_hit(&self, j: usize) -> bool {
        self.clearance[j] <= self.gain[j] * (self.radius + self.radius_at[j]) + SKIP_SLACK
    }
}

impl Collider<'_> {
    /// Probe of vertex `j` and the L1 norm of its weight row.
    fn probe(&self, predicted: &[Vec3], j: usize) -> (Vec3, f32) {
        match self.mode {
            CollisionMode::Proxy => {
                let mut p = Vec3::zeros();
                let mut l1 = 0.0;
                for (&w, q) in self.proxies[j].weight_row.iter().zip(predicted) {
                    p += q * w;
                    l1 += w.abs();
                }
                (p, l1)
            }
            _ => (predicted[j], 1.0),
        }
    }

    /// Queries probe `j` if it may be inside the margin and returns the
    /// push-out depth and direction when it is.
    fn check(&self, cache: &mut ProbeCache, predicted: &[Vec3], j: usize) -> Option<(f32, Vec3)> {
        if !cache.may_hit(j) {
            return None;
        }
        let (p, gain) = self.probe(predicted, j);
        cache.gain[j] = gain;
        cache.radius_at[j] = cache.radius;
        let (lo, hi) = self.bvh.bounds();
        let outside = (p - p.sup(&lo).inf(&hi)).norm();
        let m = self.margin;
        if outside > m {
            // Distance to the bounding box bounds the distance to the mesh.
            cache.clearance[j] = outside - m;
            return None;
        }
        let sd = self.bvh.signed_distance(&p);
        cache.clearance[j] = sd.distance - m;
        (sd.distance < m).then(|| (m - sd.distance, sd.normal))
    }

    /// One Gauss-Seidel collision sweep over free vertices in index order.
    /// Returns the number of corrections applied.
    fn sweep(&self, cache: &mut ProbeCache, predicted: &mut [Vec3], inv_mass: &[f32]) -> usize {
        let mut hits = 0;
        for j in 0..predicted.len() {
            if inv_mass[j] == 0.0 {
                continue;
            }
            let Some((depth, n)) = self.check(cache, predicted, j) else {
                continue;
            };
            let gain = match self.mode {
                CollisionMode::Proxy => self.proxies[j].weight_row[j].max(MIN_PROXY_SELF_WEIGHT),
                _ => 1.0,
            };
            predicted[j] += n * (depth / gain);
            cache.grow(j, &predicted[j]);
            hits += 1;
        }
        hits
    }

    /// Pushes every still-penetrating proxy out by spreading the correction
    /// over all free vertices in proportion to their weights.
    fn distribute(&self, cache: &mut ProbeCache, predicted: &mut [Vec3], inv_mass: &[f32]) -> usize {
        let mut hits = 0;
        for j in 0..predicted.len() {
            if inv_mass[j] == 0.0 {
                continue;
            }
            let Some((depth, n)) = self.check(cache, predicted, j) else {
                continue;
            };
            let row = &self.proxies[j].weight_row;
            let denom: f32 = row.iter().zip(inv_mass).map(|(&w, &b)| b * w * w).sum();
            if denom <= 0.0 {
                continue;
            }
            let s = depth / denom;
            for m in 0..predicted.len() {
                let dm = n * (s * inv_mass[m] * row[m]);
                if dm != Vec3::zeros() {
                    predicted[m] += dm;
                    cache.grow(m, &predicted[m]);
                }
            }
            hits += 1;
        }
        hits
    }

    /// Proxy points (or cage vertices in direct mode) of free vertices.
    pub fn probe_points(&self, predicted: &[Vec3], inv_mass: &[f32]) -> Vec<Vec3> {
        (0..predicted.len())
            .filter(|&j| inv_mass[j] > 0.0)
            .map(|j| self.probe(predicted, j).0)
            .collect()
    }
}

/// `iterations` Gauss-Seidel passes (stretch → bend → volume → collision),
/// followed by collision-only cleanup sweeps until no probe is inside the
/// margin. Kinematic vertices are never moved.
pub fn project_constraints(
    state: &mut SolverState,
    constraints: &ConstraintSet,
    collider: Option<&Collider>,
    iterations: u32,
    dt: f32,
) {
    let collider = collider.filter(|c| c.mode != CollisionMode::Off);
    let mut cache = ProbeCache::new(&state.predicted);
    for _ in 0..iterations {
        constraints.project_geometric(&mut state.predicted, &state.inv_mass, &mut state.lambdas, dt);
        if let Some(c) = collider {
            cache.grow_all(&state.predicted);
            c.sweep(&mut cache, &mut state.predicted, &state.inv_mass);
        }
    }
    let Some(c) = collider else {
        return;
    };
    for _ in 0..CLEANUP_SWEEPS {
        if c.sweep(&mut cache, &mut state.predicted, &state.inv_mass) == 0 {
            return;
        }
    }
    if c.mode == CollisionMode::Proxy {
        for _ in 0..CLEANUP_SWEEPS {
            if c.distribute(&mut cache, &mut state.predicted, &state.inv_mass) == 0 {
                return;
            }
        }
    }
}

/// `v = (p − c)/Δt` for free vertices, then `c ← p` and time advances.
pub fn update_velocities(state: &mut SolverState, dt: f32) {
    for j in 0..state.positions.len() {
        if state.inv_mass[j] > 0.0 {
            state.velocities[j] = (state.predicted[j] - state.positions[j]) / dt;
        }
        state.positions[j] = state.predicted[j];
    }
    state.time += dt as f64;
}

/// `Σ max(0, ε − sd(p))²` against a closed mesh.
pub fn collision_penalty(points: &[Vec3], bvh: &MeshBvh, eps: f32) -> f64 {
    points
        .iter()
        .map(|p| (eps as f64 - bvh.signed_distance(p).distance as f64).max(0.0).powi(2))
        .sum()
}
