//! Geometric cage constraints: edge length, dihedral bending and an optional
//! global enclosed volume. All are evaluated in `f64` and projected with the
//! XPBD multiplier update, plus unilateral tethers to the kinematic roots.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::cage::Cage;
use crate::error::Result;
use crate::mesh::TriMesh;
use crate::types::{SolverConfig, Vec3};

type V64 = nalgebra::Vector3<f64>;

/// Degeneracy threshold for triangle heights and edge lengths.
const GEOM_EPS: f64 = 1e-12;

/// `C = |x_i − x_j| − rest`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchConstraint {
    pub i: u32,
    pub j: u32,
    pub rest: f32,
    pub compliance: f32,
}

/// Dihedral angle across the edge `(v[0], v[1])` between faces
/// `(v[0], v[1], v[2])` and `(v[1], v[0], v[3])`; `C = wrap(φ − rest)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BendConstraint {
    pub v: [u32; 4],
    pub rest: f32,
    pub compliance: f32,
}

/// `C = V − rest` over the whole closed cage.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeConstraint {
    pub faces: Vec<[u32; 3]>,
    pub rest: f64,
    pub compliance: f32,
}

/// Long-range attachment: `|x_vertex − x_anchor| ≤ max_len`, where the anchor
/// is the vertex's nearest kinematic vertex along rest-length edge paths.
/// Unilateral and stiff; it carries no multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetherConstraint {
    pub vertex: u32,
    pub anchor: u32,
    pub max_len: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub stretch: Vec<StretchConstraint>,
    pub bend: Vec<BendConstraint>,
    pub volume: Option<VolumeConstraint>,
    pub tethers: Vec<TetherConstraint>,
    pub collision_margin: f32,
}

impl ConstraintSet {
    /// Total number of XPBD multipliers.
    pub fn len(&self) -> usize {
        self.stretch.len() + self.bend.len() + usize::from(self.volume.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|C|` over stretch constraints, relative to the rest length.
    pub fn max_relative_stretch(&self, positions: &[Vec3]) -> f32 {
        self.stretch
            .iter()
            .map(|s| (stretch_value(positions, s) / s.rest as f64).abs() as f32)
            .fold(0.0, f32::max)
    }

    /// All constraint values in multiplier order.
    pub fn residuals(&self, positions: &[Vec3]) -> Vec<f64> {
        let mut r: Vec<f64> = self.stretch.iter().map(|s| stretch_value(positions, s)).collect();
        r.extend(
            self.bend
                .iter()
                .map(|b| wrap_angle(dihedral(positions, &b.v) - b.rest as f64)),
        );
        if let Some(v) = &self.volume {
            r.push(enclosed_volume(positions, &v.faces) - v.rest);
        }
        r
    }
}

/// One stretch constraint per unique edge and one bend constraint per
/// interior edge, at the cage's rest pose.
pub fn build_constraints(cage: &Cage, config: &SolverConfig) -> Result<ConstraintSet> {
    let mesh = TriMesh::new(cage.vertices.clone(), cage.faces.clone());
    mesh.check_watertight()?;
    let x = &cage.vertices;
    let edges = mesh.edge_faces();
    let mut stretch = Vec::with_capacity(edges.len());
    let mut bend = Vec::with_capacity(edges.len());
    for ([a, b], ef) in edges {
        let rest = (x[a as usize] - x[b as usize]).norm();
        if rest > 0.0 {
            stretch.push(StretchConstraint {
                i: a,
                j: b,
                rest,
                compliance: config.stretch_compliance,
            });
        }
        let c = third(&cage.faces[ef.forward as usize], a, b);
        let d = third(&cage.faces[ef.backward as usize], a, b);
        let v = [a, b, c, d];
        bend.push(BendConstraint {
            v,
            rest: dihedral(x, &v) as f32,
            compliance: config.bend_compliance,
        });
    }
    let volume = config.volume_compliance.map(|compliance| VolumeConstraint {
        rest: enclosed_volume(x, &cage.faces),
        faces: cage.faces.clone(),
        compliance,
    });
    let tethers = build_tethers(&stretch, &cage.inv_mass);
    Ok(ConstraintSet {
        stretch,
        bend,
        volume,
        tethers,
        collision_margin: config.collision_margin,
    })
}

/// One tether per free vertex connected to a kinematic one, with the
/// shortest edge-path rest distance as its limit.
pub fn build_tethers(stretch: &[StretchConstraint], inv_mass: &[f32]) -> Vec<TetherConstraint> {
    let n = inv_mass.len();
    let mut adj = vec![Vec::new(); n];
    for s in stretch {
        adj[s.i as usize].push((s.j, s.rest as f64));
        adj[s.j as usize].push((s.i, s.rest as f64));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut anchor = vec![u32::MAX; n];
    // Non-negative f64 bit patterns order like the values.
    let mut heap = BinaryHeap::new();
    for (j, &w) in inv_mass.iter().enumerate() {
        if w == 0.0 {
            dist[j] = 0.0;
            anchor[j] = j as u32;
            heap.push(Reverse((0u64, j as u32)));
        }
    }
    while let Some(Reverse((bits, j))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[j as usize] {
            continue;
        }
        for &(k, len) in &adj[j as usize] {
            let nd = d + len;
            if nd < dist[k as usize] {
                dist[k as usize] = nd;
                anchor[k as usize] = anchor[j as usize];
                heap.push(Reverse((nd.to_bits(), k)));
            }
        }
    }
    (0..n)
        .filter(|&j| inv_mass[j] > 0.0 && anchor[j] != u32::MAX)
        .map(|j| TetherConstraint {
            vertex: j as u32,
            anchor: anchor[j],
            max_len: dist[j] as f32,
        })
        .collect()
}

fn third(face: &[u32; 3], a: u32, b: u32) -> u32 {
    *face.iter().find(|&&v| v != a && v != b).expect("face contains edge")
}

fn p64(positions: &[Vec3], i: u32) -> V64 {
    positions[i as usize].cast::<f64>()
}

fn stretch_value(positions: &[Vec3], s: &StretchConstraint) -> f64 {
    (p64(positions, s.i) - p64(positions, s.j)).norm() - s.rest as f64
}

/// Maps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Signed dihedral angle, zero when the two faces are coplanar and
/// consistently oriented.
pub fn dihedral(positions: &[Vec3], v: &[u32; 4]) -> f64 {
    let [a, b, c, d] = v.map(|i| p64(positions, i));
    let e = b - a;
    let n1 = e.cross(&(c - a));
    let n2 = (a - b).cross(&(d - b));
    let en = e.norm();
    if en < GEOM_EPS {
        return 0.0;
    }
    n1.cross(&n2).dot(&(e / en)).atan2(n1.dot(&n2))
}

/// Value and gradients of the dihedral angle, or `None` when degenerate.
fn dihedral_gradients(a: V64, b: V64, c: V64, d: V64) -> Option<(f64, [V64; 4])> {
    let e = b - a;
    let el = e.norm();
    if el < GEOM_EPS {
        return None;
    }
    let eh = e / el;
    let n1 = e.cross(&(c - a));
    let n2 = (a - b).cross(&(d - b));
    let (l1, l2) = (n1.norm(), n2.norm());
    if l1 < GEOM_EPS * el || l2 < GEOM_EPS * el {
        return None;
    }
    let (n1h, n2h) = (n1 / l1, n2 / l2);
    let phi = n1h.cross(&n2h).dot(&eh).atan2(n1h.dot(&n2h));
    let (h1, h2) = (l1 / el, l2 / el);
    let gc = -n1h / h1;
    let gd = -n2h / h2;
    let ac = (c - a).dot(&eh) / el;
    let ad = (d - a).dot(&eh) / el;
    let ga = -(1.0 - ac) * gc - (1.0 - ad) * gd;
    let gb = -ac * gc - ad * gd;
    Some((phi, [ga, gb, gc, gd]))
}

/// Signed volume enclosed by an outward-oriented closed mesh.
pub fn enclosed_volume(positions: &[Vec3], faces: &[[u32; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| p64(positions, i));
            a.cross(&b).dot(&c)
        })
        .sum::<f64>()
        / 6.0
}

/// Applies `Δλ` along `grads` to the listed vertices, weighted by inverse
/// mass. Returns the updated multiplier.
fn xpbd_apply(
    positions: &mut [Vec3],
    inv_mass: &[f32],
    idx: &[u32],
    grads: &[V64],
    c: f64,
    lambda: f32,
    alpha_tilde: f64,
) -> f32 {
    let denom: f64 = idx
        .iter()
        .zip(grads)
        .map(|(&i, g)| inv_mass[i as usize] as f64 * g.norm_squared())
        .sum::<f64>()
        + alpha_tilde;
    if denom <= 0.0 {
        return lambda;
    }
    let lambda = lambda as f64;
    let dl = (-c - alpha_tilde * lambda) / denom;
    for (&i, g) in idx.iter().zip(grads) {
        let w = inv_mass[i as usize] as f64;
        if w > 0.0 {
            let p = &mut positions[i as usize];
            *p = (p.cast::<f64>() + g * (w * dl)).cast::<f32>();
        }
    }
    (lambda + dl) as f32
}

impl ConstraintSet {
    /// One Gauss-Seidel sweep over stretch, bend, volume and tether
    /// constraints in that fixed order. `lambdas` holds one multiplier per constraint.
    pub(crate) fn project_geometric(&self, positions: &mut [Vec3], inv_mass: &[f32], lambdas: &mut [f32], dt: f32) {
        let inv_dt2 = 1.0 / (dt as f64 * dt as f64);
        let mut k = 0;
        for s in &self.stretch {
            if inv_mass[s.i as usize] + inv_mass[s.j as usize] == 0.0 {
                k += 1;
                continue;
            }
            let (pi, pj) = (p64(positions, s.i), p64(positions, s.j));
            let d = pi - pj;
            let len = d.norm();
            if len > GEOM_EPS {
                let n = d / len;
                lambdas[k] = xpbd_apply(
                    positions,
                    inv_mass,
                    &[s.i, s.j],
                    &[n, -n],
                    len - s.rest as f64,
                    lambdas[k],
                    s.compliance as f64 * inv_dt2,
                );
            }
            k += 1;
        }
        for b in &self.bend {
            if b.v.iter().all(|&i| inv_mass[i as usize] == 0.0) {
                k += 1;
                continue;
            }
            let [a, bb, c, d] = b.v.map(|i| p64(positions, i));
            if let Some((phi, g)) = dihedral_gradients(a, bb, c, d) {
                lambdas[k] = xpbd_apply(
                    positions,
                    inv_mass,
                    &b.v,
                    &g,
                    wrap_angle(phi - b.rest as f64),
                    lambdas[k],
                    b.compliance as f64 * inv_dt2,
                );
            }
            k += 1;
        }
        if let Some(vol) = &self.volume {
            let mut grads = vec![V64::zeros(); positions.len()];
            for f in &vol.faces {
                let [a, b, c] = f.map(|i| p64(positions, i));
                grads[f[0] as usize] += b.cross(&c) / 6.0;
                grads[f[1] as usize] += c.cross(&a) / 6.0;
                grads[f[2] as usize] += a.cross(&b) / 6.0;
            }
            let idx: Vec<u32> = (0..positions.len() as u32).collect();
            let c = enclosed_volume(positions, &vol.faces) - vol.rest;
            lambdas[k] = xpbd_apply(
                positions,
                inv_mass,
                &idx,
                &grads,
                c,
                lambdas[k],
                vol.compliance as f64 * inv_dt2,
            );
        }
        for t in &self.tethers {
            let (wv, wa) = (inv_mass[t.vertex as usize] as f64, inv_mass[t.anchor as usize] as f64);
            let d = p64(positions, t.vertex) - p64(positions, t.anchor);
            let len = d.norm();
            let excess = len - t.max_len as f64;
            if excess <= 0.0 || wv + wa == 0.0 {
                continue;
            }
            let step = d * (excess / (len * (wv + wa)));
            positions[t.vertex as usize] = (p64(positions, t.vertex) - step * wv).cast();
            positions[t.anchor as usize] = (p64(positions, t.anchor) + step * wa).cast();
        }
    }
}
