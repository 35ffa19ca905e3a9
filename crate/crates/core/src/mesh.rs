//! Plain indexed triangle meshes and their topology helpers.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::Vec3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

/// For an undirected edge `(a, b)` with `a < b`: the face containing the
/// directed edge `a -> b` and the one containing `b -> a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFaces {
    pub forward: u32,
    pub backward: u32,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        Self { vertices, faces }
    }

    pub fn check_indices(&self) -> Result<()> {
        let n = self.vertices.len();
        for f in &self.faces {
            for &i in f {
                if i as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "face vertex",
                        index: i as usize,
                        len: n,
                    });
                }
            }
        }
        Ok(())
    }

    /// Directed-edge incidence: every undirected edge must appear exactly
    /// once in each direction. Returns the number of offending edges.
    pub fn count_bad_edges(&self) -> usize {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut bad = 0;
        for (&(a, b), &count) in &directed {
            let back = directed.get(&(b, a)).copied().unwrap_or(0);
            if count != 1 || back != 1 || a == b {
                bad += 1;
            }
        }
        bad
    }

    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.count_bad_edges() == 0
    }

    pub fn check_watertight(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        self.check_indices()?;
        match self.count_bad_edges() {
            0 => Ok(()),
            bad_edges => Err(Error::NotWatertight { bad_edges }),
        }
    }

    /// Undirected edges in ascending `(min, max)` order with their two faces.
    /// Assumes the mesh is watertight.
    pub fn edge_faces(&self) -> Vec<([u32; 2], EdgeFaces)> {
        let mut map: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = map.entry(key).or_insert((u32::MAX, u32::MAX));
                if a < b {
                    e.0 = fi as u32;
                } else {
                    e.1 = fi as u32;
                }
            }
        }
        let mut out: Vec<_> = map
            .into_iter()
            .map(|((a, b), (fw, bw))| {
                (
                    [a, b],
                    EdgeFaces {
                        forward: fw,
                        backward: bw,
                    },
                )
            })
            .collect();
        out.sort_unstable_by_key(|(e, _)| *e);
        out
    }

    pub fn unique_edges(&self) -> Vec<[u32; 2]> {
        let mut edges: Vec<[u32; 2]> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| [f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3])]))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used = {
            let mut u = vec![false; self.vertices.len()];
            for f in &self.faces {
                for &i in f {
                    u[i as usize] = true;
                }
            }
            u.iter().filter(|&&b| b).count()
        };
        used as i64 - self.unique_edges().len() as i64 + self.faces.len() as i64
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds(&self.vertices)
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f32 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Signed enclosed volume (positive for outward-facing windings).
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0] as usize].cast::<f64>();
                let b = self.vertices[f[1] as usize].cast::<f64>();
                let c = self.vertices[f[2] as usize].cast::<f64>();
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Generalized winding number of `p`: 1 inside a closed outward mesh,
    /// 0 outside.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        winding_number(&self.vertices, &self.faces, p)
    }
}

pub fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f32::INFINITY);
    let mut hi = Vec3::repeat(f32::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Sum of signed solid angles over `4π` (Van Oosterom–Strackee).
pub fn winding_number(vertices: &[Vec3], faces: &[[u32; 3]], p: &Vec3) -> f64 {
    let p = p.cast::<f64>();
    let mut total = 0.0;
    for f in faces {
        let a: Vector3<f64> = vertices[f[0] as usize].cast::<f64>() - p;
        let b: Vector3<f64> = vertices[f[1] as usize].cast::<f64>() - p;
        let c: Vector3<f64> = vertices[f[2] as usize].cast::<f64>() - p;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let det = a.dot(&b.cross(&c));
        let div = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * det.atan2(div);
    }
    total / (4.0 * std::f64::consts::PI)
}
