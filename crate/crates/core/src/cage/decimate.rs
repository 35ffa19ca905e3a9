use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::types::Vec3;

type V64 = Vector3<f64>;

/// Allowed inward slack of a new vertex against its neighbouring face
/// planes, relative to the mesh diagonal.
const PLANE_SLACK: f64 = 1e-7;
/// A new vertex may sit at most this many edge lengths from the edge midpoint.
const MAX_MOVE: f64 = 1.0;
/// Minimum normal agreement between a face before and after a collapse.
const MIN_NORMAL_DOT: f64 = 0.2;
/// Triangle quality floor (1 for equilateral).
const MIN_QUALITY: f64 = 0.15;

/// Result of [`decimate`].
#[derive(Debug, Clone)]
pub struct Decimation {
    pub mesh: TriMesh,
    /// Set when the target could not be met without breaking enclosure.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamp: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest, then the lowest indices.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

struct State {
    pos: Vec<V64>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vfaces: Vec<Vec<u32>>,
    alive: Vec<bool>,
    quadric: Vec<Matrix4<f64>>,
    stamp: Vec<u32>,
    slack: f64,
}

fn quality(a: &V64, b: &V64, c: &V64) -> f64 {
    let area2 = (b - a).cross(&(c - a)).norm();
    let denom = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
    if denom == 0.0 {
        return 0.0;
    }
    // 4√3·area / Σℓ², with area = area2 / 2.
    2.0 * 3f64.sqrt() * area2 / denom
}

impl State {
    fn new(mesh: &TriMesh) -> Self {
        let pos: Vec<V64> = mesh.vertices.iter().map(|v| v.cast()).collect();
        let mut vfaces = vec![Vec::new(); pos.len()];
        let mut quadric = vec![Matrix4::zeros(); pos.len()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            let [a, b, c] = f.map(|i| pos[i as usize]);
            let n = (b - a).cross(&(c - a));
            let area = 0.5 * n.norm();
            if area > 0.0 {
                let n = n.normalize();
                let p = Vector4::new(n.x, n.y, n.z, -n.dot(&a));
                let k = p * p.transpose() * area;
                for &i in f {
                    quadric[i as usize] += k;
                }
            }
            for &i in f {
                vfaces[i as usize].push(fi as u32);
            }
        }
        Self {
            slack: PLANE_SLACK * mesh.diameter() as f64,
            face_alive: vec![true; mesh.faces.len()],
            faces: mesh.faces.clone(),
            alive: vec![true; pos.len()],
            stamp: vec![0; pos.len()],
            pos,
            vfaces,
            quadric,
        }
    }

    fn star(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vfaces[v as usize]
            .iter()
            .copied()
            .filter(|&f| self.face_alive[f as usize])
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut n: Vec<u32> = self
            .star(v)
            .flat_map(|f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn normal(&self, f: &[u32; 3]) -> V64 {
        let [a, b, c] = f.map(|i| self.pos[i as usize]);
        (b - a).cross(&(c - a))
    }

    /// Best admissible position for collapsing edge `(a, b)`, with its cost.
    fn evaluate(&self, a: u32, b: u32) -> Option<(f64, V64)> {
        let (na, nb) = (self.neighbors(a), self.neighbors(b));
        if na.binary_search(&b).is_err() {
            return None;
        }
        let shared: Vec<u32> = na.iter().copied().filter(|v| nb.binary_search(v).is_ok()).collect();
        // Link condition, and no opposite vertex may drop to valence 2.
        if shared.len() != 2 || shared.iter().any(|&v| self.neighbors(v).len() <= 3) {
            return None;
        }
        let mut star: Vec<u32> = self.star(a).chain(self.star(b)).collect();
        star.sort_unstable();
        star.dedup();
        let planes: Vec<(V64, V64)> = star
            .iter()
            .filter_map(|&f| {
                let f = self.faces[f as usize];
                let n = self.normal(&f);
                let len = n.norm();
                (len > 0.0).then(|| (n / len, self.pos[f[0] as usize]))
            })
            .collect();
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let mid = (pa + pb) * 0.5;
        let edge = (pb - pa).norm();
        let q = self.quadric[a as usize] + self.quadric[b as usize];
        let cost = |v: &V64| {
            let h = Vector4::new(v.x, v.y, v.z, 1.0);
            (h.transpose() * q * h)[0].max(0.0)
        };

        let mut outward = V64::zeros();
        for &f in &star {
            outward += self.normal(&self.faces[f as usize]);
        }
        let outward = outward.try_normalize(1e-300).unwrap_or_else(V64::zeros);

        let mut candidates = vec![pa, pb, mid];
        let a3: Matrix3<f64> = q.fixed_view::<3, 3>(0, 0).into_owned();
        let b3 = -q.fixed_view::<3, 1>(0, 3).into_owned();
        if a3.determinant().abs() > 1e-12 * a3.norm().powi(3) {
            if let Some(opt) = a3.lu().solve(&b3) {
                candidates.push(opt);
            }
        }
        // Push candidates outward until every neighbouring plane is satisfied.
        for base in candidates.clone() {
            let mut t: f64 = 0.0;
            for (n, p) in &planes {
                let g = n.dot(&(base - p));
                let s = n.dot(&outward);
                if g < 0.0 && s > 1e-9 {
                    t = t.max(-g / s);
                }
            }
            if t > 0.0 {
                candidates.push(base + outward * t);
            }
        }

        let mut best: Option<(f64, V64)> = None;
        for v in candidates {
            if (v - mid).norm() > MAX_MOVE * edge + 1e-12 {
                continue;
            }
            if planes.iter().any(|(n, p)| n.dot(&(v - p)) < -self.slack) {
                continue;
            }
            if !self.shape_ok(a, b, &v, &star) {
                continue;
            }
            let c = cost(&v);
            if best.map_or(true, |(bc, _)| c < bc) {
                best = Some((c, v));
            }
        }
        best
    }

    /// Flip and quality guard for the faces that survive the collapse.
    fn shape_ok(&self, a: u32, b: u32, v: &V64, star: &[u32]) -> bool {
        let mut old_min = f64::INFINITY;
        let mut new_min = f64::INFINITY;
        for &f in star {
            let face = self.faces[f as usize];
            if face.contains(&a) && face.contains(&b) {
                continue;
            }
            let old = face.map(|i| self.pos[i as usize]);
            let new = face.map(|i| if i == a || i == b { *v } else { self.pos[i as usize] });
            let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
            let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
            let (lo, ln) = (n_old.norm(), n_new.norm());
            if ln <= 0.0 || lo <= 0.0 || n_old.dot(&n_new) < MIN_NORMAL_DOT * lo * ln {
                return false;
            }
            old_min = old_min.min(quality(&old[0], &old[1], &old[2]));
            new_min = new_min.min(quality(&new[0], &new[1], &new[2]));
        }
        new_min >= MIN_QUALITY.min(0.5 * old_min)
    }

    fn collapse(&mut self, a: u32, b: u32, v: V64) {
        let star_b: Vec<u32> = self.star(b).collect();
        for f in star_b {
            let face = &mut self.faces[f as usize];
            if face.contains(&a) {
                self.face_alive[f as usize] = false;
                continue;
            }
            for i in face.iter_mut() {
                if *i == b {
                    *i = a;
                }
            }
            self.vfaces[a as usize].push(f);
        }
        let alive = &self.face_alive;
        self.vfaces[a as usize].retain(|&f| alive[f as usize]);
        self.vfaces[b as usize].clear();
        self.alive[b as usize] = false;
        self.pos[a as usize] = v;
        let qb = self.quadric[b as usize];
        self.quadric[a as usize] += qb;
    }

    fn push_edges(&self, v: u32, heap: &mut BinaryHeap<Candidate>) {
        for u in self.neighbors(v) {
            let (a, b) = (v.min(u), v.max(u));
            if let Some((cost, _)) = self.evaluate(a, b) {
                heap.push(Candidate {
                    cost,
                    a,
                    b,
                    stamp: (self.stamp[a as usize], self.stamp[b as usize]),
                });
            }
        }
    }

    fn into_mesh(self) -> TriMesh {
        let mut remap = vec![u32::MAX; self.pos.len()];
        let mut vertices = Vec::new();
        for (i, p) in self.pos.iter().enumerate() {
            if self.alive[i] {
                remap[i] = vertices.len() as u32;
                vertices.push(Vec3::new(p.x as f32, p.y as f32, p.z as f32));
            }
        }
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| f.map(|i| remap[i as usize]))
            .collect();
        TriMesh::new(vertices, faces)
    }
}

/// Quadric-error edge collapse down to at most `target_vertices`, moving
/// vertices only outward so the surface keeps enclosing everything it
/// enclosed before.
///
/// Each new vertex must lie on or outside the plane of every face around
/// the collapsed edge, which makes the result contain the input. When no
/// admissible collapse remains the smallest reachable mesh is returned with
/// a warning.
pub fn decimate(mesh: &TriMesh, target_vertices: usize) -> Result<Decimation> {
    if target_vertices < 4 {
        return Err(Error::invalid("target_vertices", "must be at least 4"));
    }
    mesh.check_watertight()?;
    let mut state = State::new(mesh);
    let mut remaining = mesh.vertices.len();
    if remaining <= target_vertices {
        return Ok(Decimation {
            mesh: mesh.clone(),
            warning: None,
        });
    }
    let mut heap = BinaryHeap::new();
    for [a, b] in mesh.unique_edges() {
        if let Some((cost, _)) = state.evaluate(a, b) {
            heap.push(Candidate {
                cost,
                a,
                b,
                stamp: (0, 0),
            });
        }
    }
    while remaining > target_vertices {
        let Some(c) = heap.pop() else { break };
        let (a, b) = (c.a as usize, c.b as usize);
        if !state.alive[a] || !state.alive[b] || c.stamp != (state.stamp[a], state.stamp[b]) {
            continue;
        }
        // Neighbouring moves may have changed the admissible region.
        let Some((cost, v)) = state.evaluate(c.a, c.b) else {
            continue;
        };
        if cost > c.cost * (1.0 + 1e-9) + 1e-300 {
            heap.push(Candidate { cost, ..c });
            continue;
        }
        state.collapse(c.a, c.b, v);
        remaining -= 1;
        let ring = state.neighbors(c.a);
        state.stamp[a] += 1;
        for &u in &ring {
            state.stamp[u as usize] += 1;
        }
        state.push_edges(c.a, &mut heap);
        for &u in &ring {
            state.push_edges(u, &mut heap);
        }
    }
    let warning = (remaining > target_vertices).then(|| {
        format!("stopped at {remaining} vertices (target {target_vertices}): no further collapse keeps the enclosure")
    });
    Ok(Decimation {
        mesh: state.into_mesh(),
        warning,
    })
}
