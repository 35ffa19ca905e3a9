//! Bounding-volume hierarchy over mesh faces with closest-point and signed
//! distance queries.
//!
//! Signs come from angle-weighted pseudo-normals (Bærentzen & Aanæs), which
//! are exact for closed, consistently oriented meshes.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::types::Vec3;

type V64 = Vector3<f64>;

const LEAF_SIZE: usize = 4;

/// Closest feature of a triangle, in local corner numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Edge from corner `k` to corner `(k + 1) % 3`.
    Edge(u8),
    Vertex(u8),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TriClosest {
    pub point: V64,
    pub bary: [f64; 3],
    pub feature: Feature,
}

/// Closest point on triangle `abc` (Ericson, Real-Time Collision Detection 5.1.5).
pub(crate) fn closest_on_triangle(p: &V64, a: &V64, b: &V64, c: &V64) -> TriClosest {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return TriClosest {
            point: *a,
            bary: [1.0, 0.0, 0.0],
            feature: Feature::Vertex(0),
        };
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return TriClosest {
            point: *b,
            bary: [0.0, 1.0, 0.0],
            feature: Feature::Vertex(1),
        };
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return TriClosest {
            point: a + ab * v,
            bary: [1.0 - v, v, 0.0],
            feature: Feature::Edge(0),
        };
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return TriClosest {
            point: *c,
            bary: [0.0, 0.0, 1.0],
            feature: Feature::Vertex(2),
        };
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return TriClosest {
            point: a + ac * w,
            bary: [1.0 - w, 0.0, w],
            feature: Feature::Edge(2),
        };
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return TriClosest {
            point: b + (c - b) * w,
            bary: [0.0, 1.0 - w, w],
            feature: Feature::Edge(1),
        };
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    TriClosest {
        point: a + ab * v + ac * w,
        bary: [1.0 - v - w, v, w],
        feature: Feature::Face,
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: [f32; 3],
    hi: [f32; 3],
    /// Leaf: `count > 0`, items `[start, start + count)`.
    /// Inner: `count == 0`, children `start` and `start + 1`.
    start: u32,
    count: u32,
}

impl Node {
    fn dist_sq(&self, p: &V64) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = p[k];
            let lo = self.lo[k] as f64;
            let hi = self.hi[k] as f64;
            let e = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            };
            d += e * e;
        }
        d
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClosestHit {
    pub face: u32,
    pub point: Vec3,
    pub bary: [f32; 3],
    pub feature: Feature,
    pub distance: f32,
}

/// Two squared distances closer than this (relative) count as a tie, which
/// the lower face index wins.
const TIE_EPS: f64 = 1e-12;

/// Closest-point hierarchy over a set of faces of a mesh.
#[derive(Debug, Clone)]
pub struct FaceBvh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    items: Vec<u32>,
    nodes: Vec<Node>,
}

impl FaceBvh {
    /// Hierarchy over all faces.
    pub fn build(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Self> {
        let all: Vec<u32> = (0..faces.len() as u32).collect();
        Self::build_subset(vertices, faces, &all)
    }

    /// Hierarchy over `subset`; hits report indices into `faces`.
    pub fn build_subset(vertices: &[Vec3], faces: &[[u32; 3]], subset: &[u32]) -> Result<Self> {
        if subset.is_empty() || vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        TriMesh::new(vertices.to_vec(), faces.to_vec()).check_indices()?;
        for &f in subset {
            if f as usize >= faces.len() {
                return Err(Error::IndexOutOfRange {
                    what: "face subset",
                    index: f as usize,
                    len: faces.len(),
                });
            }
        }
        let mut bvh = Self {
            vertices: vertices.to_vec(),
            faces: faces.to_vec(),
            items: subset.to_vec(),
            nodes: Vec::with_capacity(2 * subset.len() / LEAF_SIZE + 1),
        };
        let centroids: Vec<Vec3> = bvh
            .faces
            .iter()
            .map(|f| (vertices[f[0] as usize] + vertices[f[1] as usize] + vertices[f[2] as usize]) / 3.0)
            .collect();
        bvh.nodes.push(Node {
            lo: [0.0; 3],
            hi: [0.0; 3],
            start: 0,
            count: subset.len() as u32,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (bvh.nodes[ni].start as usize, bvh.nodes[ni].count as usize);
            if count <= LEAF_SIZE {
                continue;
            }
            let items = &mut bvh.items[start..start + count];
            let (mut lo, mut hi) = (Vec3::repeat(f32::INFINITY), Vec3::repeat(f32::NEG_INFINITY));
            for &f in items.iter() {
                lo = lo.inf(&centroids[f as usize]);
                hi = hi.sup(&centroids[f as usize]);
            }
            let axis = (hi - lo).imax();
            let mid = count / 2;
            items.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = bvh.nodes.len();
            bvh.nodes.push(Node {
                lo: [0.0; 3],
                hi: [0.0; 3],
                start: start as u32,
                count: mid as u32,
            });
            bvh.nodes.push(Node {
                lo: [0.0; 3],
                hi: [0.0; 3],
                start: (start + mid) as u32,
                count: (count - mid) as u32,
            });
            bvh.nodes[ni].start = left as u32;
            bvh.nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        bvh.refit_bounds();
        Ok(bvh)
    }

    /// Moves the vertices, keeping the tree topology.
    pub fn refit(&mut self, vertices: &[Vec3]) -> Result<()> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::CountMismatch {
                what: "refit vertices",
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        self.vertices.copy_from_slice(vertices);
        self.refit_bounds();
        Ok(())
    }

    fn refit_bounds(&mut self) {
        // Children always follow their parent, so a reverse sweep is bottom-up.
        for ni in (0..self.nodes.len()).rev() {
            let node = self.nodes[ni];
            let (mut lo, mut hi) = ([f32::INFINITY; 3], [f32::NEG_INFINITY; 3]);
            if node.count > 0 {
                for &f in &self.items[node.start as usize..(node.start + node.count) as usize] {
                    for &v in &self.faces[f as usize] {
                        let p = self.vertices[v as usize];
                        for k in 0..3 {
                            lo[k] = lo[k].min(p[k]);
                            hi[k] = hi[k].max(p[k]);
                        }
                    }
                }
            } else {
                for c in [node.start as usize, node.start as usize + 1] {
                    for k in 0..3 {
                        lo[k] = lo[k].min(self.nodes[c].lo[k]);
                        hi[k] = hi[k].max(self.nodes[c].hi[k]);
                    }
                }
            }
            self.nodes[ni].lo = lo;
            self.nodes[ni].hi = hi;
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    /// Bounding box of all indexed faces.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let r = &self.nodes[0];
        (Vec3::from(r.lo), Vec3::from(r.hi))
    }

    fn tri64(&self, f: u32) -> [V64; 3] {
        self.faces[f as usize].map(|v| self.vertices[v as usize].cast::<f64>())
    }

    /// Closest surface point; ties go to the lowest face index.
    pub fn closest(&self, p: &Vec3) -> ClosestHit {
        let (f, hit, d2) = self.closest64(&p.cast::<f64>());
        ClosestHit {
            face: f,
            point: hit.point.cast::<f32>(),
            bary: hit.bary.map(|b| b as f32),
            feature: hit.feature,
            distance: d2.sqrt() as f32,
        }
    }

    pub(crate) fn closest64(&self, p: &V64) -> (u32, TriClosest, f64) {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(u32, TriClosest)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.dist_sq(p) > best_d2 * (1.0 + TIE_EPS) + TIE_EPS {
                continue;
            }
            if node.count > 0 {
                for &f in &self.items[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = self.tri64(f);
                    let hit = closest_on_triangle(p, &a, &b, &c);
                    let d2 = (p - hit.point).norm_squared();
                    let tol = TIE_EPS * (1.0 + best_d2.min(d2));
                    let better = match best {
                        None => true,
                        Some((bf, _)) => d2 < best_d2 - tol || ((d2 - best_d2).abs() <= tol && f < bf),
                    };
                    if better {
                        best_d2 = d2;
                        best = Some((f, hit));
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                let dl = self.nodes[l as usize].dist_sq(p);
                let dr = self.nodes[r as usize].dist_sq(p);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let (f, hit) = best.expect("non-empty hierarchy");
        (f, hit, best_d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistance {
    /// Negative inside, positive outside.
    pub distance: f32,
    pub closest: Vec3,
    /// Pseudo-normal of the closest feature (outward).
    pub normal: Vec3,
    pub face: u32,
}

/// Hierarchy plus angle-weighted pseudo-normals of a closed mesh.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    tree: FaceBvh,
    face_normals: Vec<V64>,
    /// Per face, per local edge `k -> k+1`.
    edge_normals: Vec<[V64; 3]>,
    vertex_normals: Vec<V64>,
    /// `(face, local edge)` of the twin of each directed edge.
    edge_twins: Vec<[(u32, u8); 3]>,
}

impl MeshBvh {
    /// Fails unless the mesh is watertight and consistently oriented.
    pub fn build(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Self> {
        let mesh = TriMesh::new(vertices.to_vec(), faces.to_vec());
        mesh.check_watertight()?;
        let tree = FaceBvh::build(vertices, faces)?;
        let mut edge_twins = vec![[(u32::MAX, 0u8); 3]; faces.len()];
        let mut directed = std::collections::HashMap::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                directed.insert((f[k], f[(k + 1) % 3]), (fi as u32, k as u8));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                edge_twins[fi][k] = directed[&(f[(k + 1) % 3], f[k])];
            }
        }
        let mut bvh = Self {
            tree,
            face_normals: Vec::new(),
            edge_normals: Vec::new(),
            vertex_normals: Vec::new(),
            edge_twins,
        };
        bvh.update_normals();
        Ok(bvh)
    }

    pub fn from_mesh(mesh: &TriMesh) -> Result<Self> {
        Self::build(&mesh.vertices, &mesh.faces)
    }

    pub fn refit(&mut self, vertices: &[Vec3]) -> Result<()> {
        self.tree.refit(vertices)?;
        self.update_normals();
        Ok(())
    }

    pub fn tree(&self) -> &FaceBvh {
        &self.tree
    }

    fn update_normals(&mut self) {
        let faces = self.tree.faces();
        let nv = self.tree.vertices().len();
        self.face_normals = faces
            .iter()
            .enumerate()
            .map(|(fi, _)| {
                let [a, b, c] = self.tree.tri64(fi as u32);
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    V64::zeros()
                }
            })
            .collect();
        let mut vn = vec![V64::zeros(); nv];
        for (fi, f) in faces.iter().enumerate() {
            let t = self.tree.tri64(fi as u32);
            for k in 0..3 {
                let e1 = t[(k + 1) % 3] - t[k];
                let e2 = t[(k + 2) % 3] - t[k];
                let denom = e1.norm() * e2.norm();
                if denom > 0.0 {
                    let angle = (e1.dot(&e2) / denom).clamp(-1.0, 1.0).acos();
                    vn[f[k] as usize] += self.face_normals[fi] * angle;
                }
            }
        }
        self.vertex_normals = vn.into_iter().map(|n| n.try_normalize(0.0).unwrap_or(n)).collect();
        self.edge_normals = (0..faces.len())
            .map(|fi| {
                std::array::from_fn(|k| {
                    let (twin, _) = self.edge_twins[fi][k];
                    let n = self.face_normals[fi] + self.face_normals[twin as usize];
                    n.try_normalize(0.0).unwrap_or(self.face_normals[fi])
                })
            })
            .collect();
    }

    fn pseudo_normal(&self, face: u32, feature: Feature) -> V64 {
        match feature {
            Feature::Face => self.face_normals[face as usize],
            Feature::Edge(k) => self.edge_normals[face as usize][k as usize],
            Feature::Vertex(k) => {
                let v = self.tree.faces()[face as usize][k as usize];
                self.vertex_normals[v as usize]
            }
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> SignedDistance {
        let p64 = p.cast::<f64>();
        let (face, hit, d2) = self.tree.closest64(&p64);
        let normal = self.pseudo_normal(face, hit.feature);
        let dist = d2.sqrt();
        let sign = if (p64 - hit.point).dot(&normal) < 0.0 {
            -1.0
        } else {
            1.0
        };
        SignedDistance {
            distance: (sign * dist) as f32,
            closest: hit.point.cast::<f32>(),
            normal: normal.cast::<f32>(),
            face,
        }
    }

    /// Bounding box of the surface.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.tree.bounds()
    }
}
