//! Mean value coordinates for closed triangle cages.
//!
//! Weights use the closed-form spherical-triangle evaluation for
//! triangle meshes, including its on-face and coplanar fallbacks. They are
//! computed in `f64` and stored as `f32`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::deform::endpoints;
use crate::error::{Error, Result};
use crate::mesh::bounds;
use crate::types::{SplatSet, Vec3};

type V64 = Vector3<f64>;

/// Center plus six axis endpoints.
pub const POINTS_PER_SPLAT: usize = 7;
/// A point closer than this fraction of the cage diameter snaps to a vertex.
pub const VERTEX_SNAP_REL: f64 = 1e-8;
/// Spherical-triangle determinant below which a face is treated as coplanar
/// with the query point.
pub const PLANE_DET_EPS: f64 = 1e-10;
/// `π − h` below which the point lies on the face itself.
pub const ON_FACE_EPS: f64 = 1e-9;
/// Entries with smaller magnitude are dropped when sparsifying.
pub const TRUNCATE_EPS: f32 = 1e-7;
/// Rows are stored sparse only when fewer than this fraction survive
/// truncation.
pub const SPARSE_DENSITY: f64 = 0.3;

/// Rest-pose cage geometry prepared for weight evaluation.
#[derive(Debug, Clone)]
pub struct CageGeometry {
    vertices: Vec<V64>,
    faces: Vec<[u32; 3]>,
    snap: f64,
}

impl CageGeometry {
    pub fn new(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Self> {
        if vertices.len() < 4 || faces.len() < 4 {
            return Err(Error::EmptyMesh);
        }
        let (lo, hi) = bounds(vertices);
        let diameter = (hi - lo).cast::<f64>().norm();
        Ok(Self {
            vertices: vertices.iter().map(|v| v.cast()).collect(),
            faces: faces.to_vec(),
            snap: VERTEX_SNAP_REL * diameter,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Normalized weights of `x`; errors if `x` is outside the cage.
    pub fn weights(&self, x: &Vec3) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.vertices.len()];
        let mut scratch = Scratch::new(self.vertices.len());
        if self.weights_into(&x.cast(), &mut w, &mut scratch) {
            Ok(w)
        } else {
            Err(Error::ExteriorPoint)
        }
    }

    /// Writes normalized weights into `w`. Returns `false` for exterior points.
    fn weights_into(&self, x: &V64, w: &mut [f64], s: &mut Scratch) -> bool {
        w.iter_mut().for_each(|v| *v = 0.0);
        for (j, p) in self.vertices.iter().enumerate() {
            let dv = p - x;
            let d = dv.norm();
            if d < self.snap {
                w[j] = 1.0;
                return true;
            }
            s.dist[j] = d;
            s.unit[j] = dv / d;
        }

        let mut solid = 0.0;
        for f in &self.faces {
            let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
            let u = idx.map(|i| s.unit[i]);
            let d = idx.map(|i| s.dist[i]);
            // Chord opposite each corner and the matching spherical edge angle.
            let l: [f64; 3] = std::array::from_fn(|k| (u[(k + 1) % 3] - u[(k + 2) % 3]).norm());
            let theta = l.map(|l| 2.0 * (0.5 * l).min(1.0).asin());
            let sin_t: [f64; 3] = std::array::from_fn(|k| l[k] * (1.0 - 0.25 * l[k] * l[k]).max(0.0).sqrt());
            let cos_t = l.map(|l| 1.0 - 0.5 * l * l);
            let h = 0.5 * (theta[0] + theta[1] + theta[2]);
            let det = u[0].dot(&u[1].cross(&u[2]));
            solid += 2.0 * det.atan2(1.0 + u[0].dot(&u[1]) + u[1].dot(&u[2]) + u[2].dot(&u[0]));

            if PI - h < ON_FACE_EPS {
                // On the face: planar barycentric weights.
                w.iter_mut().for_each(|v| *v = 0.0);
                let mut total = 0.0;
                for k in 0..3 {
                    let b = sin_t[k] * d[(k + 2) % 3] * d[(k + 1) % 3];
                    w[idx[k]] += b;
                    total += b;
                }
                w.iter_mut().for_each(|v| *v /= total);
                return true;
            }
            if det.abs() < PLANE_DET_EPS {
                // Coplanar but outside the face: no contribution.
                continue;
            }
            let (sin_h, cos_h) = h.sin_cos();
            let sign = det.signum();
            let mut c = [0.0; 3];
            let mut sv = [0.0; 3];
            let mut skip = false;
            for k in 0..3 {
                let denom = sin_t[(k + 1) % 3] * sin_t[(k + 2) % 3];
                if denom <= 0.0 {
                    skip = true;
                    break;
                }
                let sin_h_minus = sin_h * cos_t[k] - cos_h * sin_t[k];
                c[k] = 2.0 * sin_h * sin_h_minus / denom - 1.0;
                sv[k] = sign * (1.0 - c[k] * c[k]).max(0.0).sqrt();
                if sv[k].abs() <= PLANE_DET_EPS {
                    skip = true;
                    break;
                }
            }
            if skip {
                continue;
            }
            for k in 0..3 {
                let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
                w[idx[k]] += (theta[k] - c[k1] * theta[k2] - c[k2] * theta[k1]) / (d[k] * sin_t[k1] * sv[k2]);
            }
        }

        // Solid angles sum to 4π inside a closed outward mesh and 0 outside.
        if solid / (4.0 * PI) < 0.5 {
            return false;
        }
        let total: f64 = w.iter().sum();
        if !total.is_finite() || total == 0.0 {
            return false;
        }
        w.iter_mut().for_each(|v| *v /= total);
        true
    }
}

struct Scratch {
    dist: Vec<f64>,
    unit: Vec<V64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            dist: vec![0.0; n],
            unit: vec![V64::zeros(); n],
        }
    }
}

/// Weights of one point against the rest cage.
pub fn mvc_weights_point(x: &Vec3, cage_vertices: &[Vec3], cage_faces: &[[u32; 3]]) -> Result<Vec<f64>> {
    CageGeometry::new(cage_vertices, cage_faces)?.weights(x)
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f32>),
    Sparse {
        offsets: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f32>,
    },
}

/// Weight tensor of shape `N × 7 × M`.
///
/// Row `(n, k)` holds the weights of tracked point `k` of splat `n` (center
/// first, then `x+, x−, y+, y−, z+, z−`).
#[derive(Debug, Clone, PartialEq)]
pub struct MvcWeights {
    n_splats: usize,
    n_cage_verts: usize,
    storage: Storage,
}

/// Borrowed weight row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f32]),
    Sparse(&'a [u32], &'a [f32]),
}

impl Row<'_> {
    pub fn sum(&self) -> f64 {
        match self {
            Row::Dense(w) => w.iter().map(|&v| v as f64).sum(),
            Row::Sparse(_, w) => w.iter().map(|&v| v as f64).sum(),
        }
    }

    /// `(cage vertex, weight)` pairs; dense rows skip exact zeros.
    pub fn entries(&self) -> Vec<(u32, f32)> {
        match self {
            Row::Dense(w) => w
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
            Row::Sparse(i, w) => i.iter().copied().zip(w.iter().copied()).collect(),
        }
    }

    pub fn to_dense(&self, m: usize) -> Vec<f32> {
        match self {
            Row::Dense(w) => w.to_vec(),
            Row::Sparse(i, w) => {
                let mut out = vec![0.0; m];
                for (&i, &v) in i.iter().zip(w.iter()) {
                    out[i as usize] = v;
                }
                out
            }
        }
    }

    /// `Σ_m w_m c_m`.
    #[inline]
    pub fn apply(&self, cage: &CageSoa) -> Vec3 {
        match self {
            Row::Dense(w) => dense_dot3(w, cage),
            Row::Sparse(idx, w) => {
                let mut acc = Vec3::zeros();
                for (&i, &v) in idx.iter().zip(w.iter()) {
                    let i = i as usize;
                    acc += Vec3::new(cage.x[i], cage.y[i], cage.z[i]) * v;
                }
                acc
            }
        }
    }
}

/// Cage positions split by coordinate for vectorized row application.
#[derive(Debug, Clone, Default)]
pub struct CageSoa {
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub z: Vec<f32>,
}

impl CageSoa {
    pub fn new(vertices: &[Vec3]) -> Self {
        let mut s = Self::default();
        s.update(vertices);
        s
    }

    pub fn update(&mut self, vertices: &[Vec3]) {
        self.x.clear();
        self.y.clear();
        self.z.clear();
        for v in vertices {
            self.x.push(v.x);
            self.y.push(v.y);
            self.z.push(v.z);
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

const LANES: usize = 8;

#[inline]
pub(crate) fn dense_dot3(w: &[f32], cage: &CageSoa) -> Vec3 {
    let n = w.len();
    let (xs, ys, zs) = (&cage.x[..n], &cage.y[..n], &cage.z[..n]);
    let mut ax = [0.0f32; LANES];
    let mut ay = [0.0f32; LANES];
    let mut az = [0.0f32; LANES];
    let chunks = n / LANES;
    for c in 0..chunks {
        let o = c * LANES;
        let wc = &w[o..o + LANES];
        let xc = &xs[o..o + LANES];
        let yc = &ys[o..o + LANES];
        let zc = &zs[o..o + LANES];
        for l in 0..LANES {
            ax[l] += wc[l] * xc[l];
            ay[l] += wc[l] * yc[l];
            az[l] += wc[l] * zc[l];
        }
    }
    let mut out = Vec3::new(ax.iter().sum(), ay.iter().sum(), az.iter().sum());
    for i in chunks * LANES..n {
        out += Vec3::new(xs[i], ys[i], zs[i]) * w[i];
    }
    out
}

impl MvcWeights {
    pub fn n_splats(&self) -> usize {
        self.n_splats
    }

    pub fn n_points_per_splat(&self) -> usize {
        POINTS_PER_SPLAT
    }

    pub fn n_cage_verts(&self) -> usize {
        self.n_cage_verts
    }

    pub fn n_rows(&self) -> usize {
        self.n_splats * POINTS_PER_SPLAT
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Row of tracked point `k` (0 = center) of splat `n`.
    #[inline]
    pub fn row(&self, n: usize, k: usize) -> Row<'_> {
        self.row_flat(n * POINTS_PER_SPLAT + k)
    }

    #[inline]
    pub fn row_flat(&self, r: usize) -> Row<'_> {
        match &self.storage {
            Storage::Dense(w) => Row::Dense(&w[r * self.n_cage_verts..(r + 1) * self.n_cage_verts]),
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let (a, b) = (offsets[r], offsets[r + 1]);
                Row::Sparse(&indices[a..b], &values[a..b])
            }
        }
    }

    /// Builds from explicit `(index, weight)` rows, choosing storage by density.
    pub fn from_rows(n_splats: usize, n_cage_verts: usize, rows: Vec<Vec<(u32, f32)>>) -> Result<Self> {
        if rows.len() != n_splats * POINTS_PER_SPLAT {
            return Err(Error::CountMismatch {
                what: "weight rows",
                expected: n_splats * POINTS_PER_SPLAT,
                got: rows.len(),
            });
        }
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        for r in &rows {
            for &(i, _) in r {
                if i as usize >= n_cage_verts {
                    return Err(Error::IndexOutOfRange {
                        what: "weight column",
                        index: i as usize,
                        len: n_cage_verts,
                    });
                }
            }
        }
        let total = (rows.len() * n_cage_verts).max(1);
        let storage = if (nnz as f64) < SPARSE_DENSITY * total as f64 {
            let mut offsets = Vec::with_capacity(rows.len() + 1);
            let mut indices = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            offsets.push(0);
            for r in rows {
                for (i, v) in r {
                    indices.push(i);
                    values.push(v);
                }
                offsets.push(indices.len());
            }
            Storage::Sparse {
                offsets,
                indices,
                values,
            }
        } else {
            let mut dense = vec![0.0f32; rows.len() * n_cage_verts];
            for (r, row) in rows.into_iter().enumerate() {
                for (i, v) in row {
                    dense[r * n_cage_verts + i as usize] = v;
                }
            }
            Storage::Dense(dense)
        };
        Ok(Self {
            n_splats,
            n_cage_verts,
            storage,
        })
    }

    fn from_dense(n_splats: usize, m: usize, dense: Vec<f32>, truncate: bool) -> Self {
        if truncate && m > 0 {
            let kept = dense.par_iter().filter(|v| v.abs() >= TRUNCATE_EPS).count();
            if (kept as f64) < SPARSE_DENSITY * dense.len() as f64 {
                let mut offsets = Vec::with_capacity(dense.len() / m + 1);
                let mut indices = Vec::with_capacity(kept);
                let mut values = Vec::with_capacity(kept);
                offsets.push(0);
                for row in dense.chunks_exact(m) {
                    let start = values.len();
                    let mut sum = 0.0f64;
                    for (i, &v) in row.iter().enumerate() {
                        if v.abs() >= TRUNCATE_EPS {
                            indices.push(i as u32);
                            values.push(v);
                            sum += v as f64;
                        }
                    }
                    for v in &mut values[start..] {
                        *v = (*v as f64 / sum) as f32;
                    }
                    offsets.push(values.len());
                }
                return Self {
                    n_splats,
                    n_cage_verts: m,
                    storage: Storage::Sparse {
                        offsets,
                        indices,
                        values,
                    },
                };
            }
        }
        Self {
            n_splats,
            n_cage_verts: m,
            storage: Storage::Dense(dense),
        }
    }
}

/// Options for [`bake_weights_with`].
#[derive(Debug, Clone, Copy)]
pub struct BakeOptions {
    /// Drop `|w| < TRUNCATE_EPS` and store sparse rows when that leaves
    /// fewer than `SPARSE_DENSITY` of the entries.
    pub truncate: bool,
}

impl Default for BakeOptions {
    fn default() -> Self {
        Self { truncate: true }
    }
}

/// All seven tracked points of every splat, row-major `N × 7`.
pub fn tracked_points(hair: &SplatSet) -> Vec<Vec3> {
    hair.splats.iter().flat_map(|s| endpoints(s).points()).collect()
}

pub fn bake_weights(hair: &SplatSet, cage_vertices: &[Vec3], cage_faces: &[[u32; 3]]) -> Result<MvcWeights> {
    bake_weights_with(hair, cage_vertices, cage_faces, BakeOptions::default())
}

/// Weights of all `7N` tracked points. Fails listing every splat with a
/// tracked point outside the cage.
pub fn bake_weights_with(
    hair: &SplatSet,
    cage_vertices: &[Vec3],
    cage_faces: &[[u32; 3]],
    options: BakeOptions,
) -> Result<MvcWeights> {
    let geometry = CageGeometry::new(cage_vertices, cage_faces)?;
    let m = geometry.n_vertices();
    let n = hair.len();
    let mut dense = vec![0.0f32; n * POINTS_PER_SPLAT * m];
    let exterior: Vec<usize> = dense
        .par_chunks_mut(POINTS_PER_SPLAT * m.max(1))
        .zip(hair.splats.par_iter())
        .enumerate()
        .map_init(
            || (Scratch::new(m), vec![0.0f64; m]),
            |(scratch, w), (i, (out, splat))| {
                let pts = endpoints(splat).points();
                let mut inside = true;
                for (k, p) in pts.iter().enumerate() {
                    inside &= geometry.weights_into(&p.cast(), w, scratch);
                    for (o, &v) in out[k * m..(k + 1) * m].iter_mut().zip(w.iter()) {
                        *o = v as f32;
                    }
                }
                (!inside).then_some(i)
            },
        )
        .flatten()
        .collect();
    if !exterior.is_empty() {
        return Err(Error::ExteriorSplats { splats: exterior });
    }
    Ok(MvcWeights::from_dense(n, m, dense, options.truncate))
}

/// Deformed positions of all `7N` tracked points: `x_d = Σ_m w_m c_d,m`.
pub fn apply_cage(weights: &MvcWeights, deformed: &[Vec3]) -> Result<Vec<Vec3>> {
    check_cage_len(weights, deformed)?;
    let soa = CageSoa::new(deformed);
    Ok((0..weights.n_rows())
        .into_par_iter()
        .map(|r| weights.row_flat(r).apply(&soa))
        .collect())
}

/// Applies a single dense row.
pub fn apply_row(row: &[f32], deformed: &[Vec3]) -> Result<Vec3> {
    if row.len() != deformed.len() {
        return Err(Error::CountMismatch {
            what: "cage vertices",
            expected: row.len(),
            got: deformed.len(),
        });
    }
    Ok(dense_dot3(row, &CageSoa::new(deformed)))
}

pub(crate) fn check_cage_len(weights: &MvcWeights, deformed: &[Vec3]) -> Result<()> {
    if deformed.len() != weights.n_cage_verts() {
        return Err(Error::CountMismatch {
            what: "cage vertices",
            expected: weights.n_cage_verts(),
            got: deformed.len(),
        });
    }
    Ok(())
}

/// Collision proxy of one cage vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyBinding {
    /// Splat whose center is nearest to the cage vertex.
    pub source_splat: u32,
    /// MVC row of that splat's center, dense over the cage vertices.
    pub weight_row: Vec<f32>,
}

impl ProxyBinding {
    /// `p_proxy = Σ_m w_m p_m`.
    pub fn evaluate(&self, positions: &[Vec3]) -> Vec3 {
        self.weight_row.iter().zip(positions).map(|(&w, p)| p * w).sum()
    }
}

/// For every cage vertex: nearest splat center (ties to the lower index)
/// and that center's weight row.
pub fn bind_proxies(cage_vertices: &[Vec3], hair: &SplatSet, weights: &MvcWeights) -> Result<Vec<ProxyBinding>> {
    if hair.is_empty() {
        return Err(Error::EmptyInput("hair set"));
    }
    if weights.n_splats() != hair.len() {
        return Err(Error::CountMismatch {
            what: "weight splats",
            expected: hair.len(),
            got: weights.n_splats(),
        });
    }
    check_cage_len(weights, cage_vertices)?;
    let m = weights.n_cage_verts();
    Ok(cage_vertices
        .par_iter()
        .map(|c| {
            let mut best = (f32::INFINITY, 0usize);
            for (i, s) in hair.splats.iter().enumerate() {
                let d = (s.mu - c).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            ProxyBinding {
                source_splat: best.1 as u32,
                weight_row: weights.row(best.1, 0).to_dense(m),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::shapes::{cuboid, regular_tetrahedron};
    use crate::mesh::TriMesh;
    use crate::types::{GaussianSplat, Mat3, Quat};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights_of(x: Vec3, cage: &TriMesh) -> Vec<f64> {
        mvc_weights_point(&x, &cage.vertices, &cage.faces).unwrap()
    }

    fn reproduce(w: &[f64], cage: &[Vec3]) -> V64 {
        w.iter().zip(cage).map(|(&w, c)| c.cast::<f64>() * w).sum()
    }

    #[test]
    fn tetrahedron_centroid_is_uniform() {
        let t = regular_tetrahedron();
        let w = weights_of(Vec3::zeros(), &t);
        for v in w {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn point_on_vertex_is_one_hot() {
        let t = regular_tetrahedron();
        let x = t.vertices[2] + Vec3::repeat(1e-10);
        let w = weights_of(x, &t);
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn point_on_face_uses_that_face() {
        let t = regular_tetrahedron();
        let f = t.faces[1];
        let x = (t.vertices[f[0] as usize] + t.vertices[f[1] as usize] + t.vertices[f[2] as usize]) / 3.0;
        let w = weights_of(x, &t);
        let other = (0..4).find(|i| !f.contains(&(*i as u32))).unwrap();
        assert!(w[other].abs() < 1e-9);
        for &i in &f {
            assert!((w[i as usize] - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn point_on_edge_interpolates_linearly() {
        let c = cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        // Edge 0 -> 1 of the box.
        let x = Vec3::new(0.25, 0.0, 0.0);
        let w = weights_of(x, &c);
        assert!((w[0] - 0.75).abs() < 1e-6, "{w:?}");
        assert!((w[1] - 0.25).abs() < 1e-6);
        assert!(w
            .iter()
            .enumerate()
            .filter(|(i, _)| *i > 1)
            .all(|(_, v)| v.abs() < 1e-9));
    }

    #[test]
    fn exterior_point_rejected() {
        let t = regular_tetrahedron();
        assert!(matches!(
            mvc_weights_point(&Vec3::repeat(2.0), &t.vertices, &t.faces),
            Err(Error::ExteriorPoint)
        ));
    }

    #[test]
    fn convex_cage_reproduces_random_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cage = fixtures::random_convex_cage(&mut rng, 1);
        let geo = CageGeometry::new(&cage.vertices, &cage.faces).unwrap();
        let diam = cage.diameter() as f64;
        let mut done = 0;
        while done < 1000 {
            let x = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if cage.winding_number(&x) < 0.5 {
                continue;
            }
            let w = geo.weights(&x).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!((reproduce(&w, &cage.vertices) - x.cast::<f64>()).norm() < 1e-5 * diam);
            done += 1;
        }
    }

    #[test]
    fn nonconvex_cage_reproduces_interior_points() {
        // L-shaped prism from two boxes sharing a face, merged by voxels.
        let cage = fixtures::l_shaped_cage();
        let geo = CageGeometry::new(&cage.vertices, &cage.faces).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut done = 0;
        while done < 300 {
            let x = Vec3::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..1.0),
            );
            if cage.winding_number(&x) < 0.5 {
                assert!(geo.weights(&x).is_err());
                continue;
            }
            let w = geo.weights(&x).unwrap();
            assert!((reproduce(&w, &cage.vertices) - x.cast::<f64>()).norm() < 1e-5 * 3.0);
            done += 1;
        }
    }

    #[test]
    fn weights_are_lipschitz_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cage = fixtures::random_convex_cage(&mut rng, 1);
        let geo = CageGeometry::new(&cage.vertices, &cage.faces).unwrap();
        let delta = 1e-4f32;
        let mut done = 0;
        while done < 100 {
            let x = Vec3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            );
            if cage.winding_number(&x) < 0.5 {
                continue;
            }
            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3).normalize();
            let a = geo.weights(&x).unwrap();
            let b = geo.weights(&(x + dir * delta)).unwrap();
            let change = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            // Finite-difference slope stays bounded well inside the cage.
            assert!(change / (delta as f64) < 50.0, "slope {}", change / delta as f64);
            done += 1;
        }
    }

    fn splat_at(mu: Vec3, s: f32) -> GaussianSplat {
        GaussianSplat::new(
            mu,
            Quat::identity(),
            Vec3::new(s, 0.5 * s, 0.25 * s),
            1.0,
            Vec3::repeat(0.5),
        )
    }

    #[test]
    fn baked_center_row_of_tetrahedron_centroid() {
        let t = regular_tetrahedron();
        let hair = SplatSet::global(vec![splat_at(Vec3::zeros(), 0.01)]);
        let w = bake_weights(&hair, &t.vertices, &t.faces).unwrap();
        assert_eq!(w.n_rows(), 7);
        for v in w.row(0, 0).to_dense(4) {
            assert!((v - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn bake_reports_exterior_splats() {
        let t = regular_tetrahedron();
        let hair = SplatSet::global(vec![splat_at(Vec3::zeros(), 0.01), splat_at(Vec3::repeat(5.0), 0.01)]);
        match bake_weights(&hair, &t.vertices, &t.faces) {
            Err(Error::ExteriorSplats { splats }) => assert_eq!(splats, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn sample_hair(rng: &mut ChaCha8Rng, cage: &TriMesh, n: usize) -> SplatSet {
        let mut out = Vec::new();
        while out.len() < n {
            let x = Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            if cage.winding_number(&x) > 0.5 && cage.winding_number(&(x + Vec3::repeat(0.05))) > 0.5 {
                out.push(splat_at(x, 0.01));
            }
        }
        SplatSet::global(out)
    }

    #[test]
    fn rest_cage_reproduces_all_tracked_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cage = fixtures::random_convex_cage(&mut rng, 1);
        let hair = sample_hair(&mut rng, &cage, 50);
        let w = bake_weights(&hair, &cage.vertices, &cage.faces).unwrap();
        let pts = apply_cage(&w, &cage.vertices).unwrap();
        for (a, b) in pts.iter().zip(tracked_points(&hair)) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn translated_and_affine_cages_carry_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cage = fixtures::random_convex_cage(&mut rng, 1);
        let hair = sample_hair(&mut rng, &cage, 30);
        let w = bake_weights(&hair, &cage.vertices, &cage.faces).unwrap();
        let src = tracked_points(&hair);
        let d = Vec3::new(0.3, -1.0, 2.0);
        let moved: Vec<_> = cage.vertices.iter().map(|v| v + d).collect();
        for (a, b) in apply_cage(&w, &moved).unwrap().iter().zip(&src) {
            assert!((a - (b + d)).norm() < 1e-5);
        }
        let a = Mat3::new(1.2, 0.3, -0.1, 0.0, 0.8, 0.4, 0.2, -0.3, 1.1);
        let t = Vec3::new(0.1, 0.2, 0.3);
        let warped: Vec<_> = cage.vertices.iter().map(|v| a * v + t).collect();
        for (x, s) in apply_cage(&w, &warped).unwrap().iter().zip(&src) {
            assert!((x - (a * s + t)).norm() < 1e-4);
        }
        assert!(matches!(apply_cage(&w, &moved[1..]), Err(Error::CountMismatch { .. })));
    }

    #[test]
    fn proxies_follow_nearest_splat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cage = fixtures::random_convex_cage(&mut rng, 1);
        let hair = sample_hair(&mut rng, &cage, 40);
        let w = bake_weights(&hair, &cage.vertices, &cage.faces).unwrap();
        let proxies = bind_proxies(&cage.vertices, &hair, &w).unwrap();
        assert_eq!(proxies.len(), cage.vertices.len());
        let d = Vec3::new(0.0, 0.5, 0.0);
        let moved: Vec<_> = cage.vertices.iter().map(|v| v + d).collect();
        for (j, p) in proxies.iter().enumerate() {
            let nearest = (0..hair.len())
                .min_by(|&a, &b| {
                    (hair.splats[a].mu - cage.vertices[j])
                        .norm()
                        .total_cmp(&(hair.splats[b].mu - cage.vertices[j]).norm())
                })
                .unwrap();
            assert_eq!(p.source_splat as usize, nearest);
            let center = hair.splats[nearest].mu;
            assert!((p.evaluate(&cage.vertices) - center).norm() < 1e-5);
            assert!((p.evaluate(&moved) - (center + d)).norm() < 1e-5);
        }
        assert!(matches!(
            bind_proxies(&cage.vertices, &SplatSet::global(vec![]), &w),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn sparse_rows_renormalize_and_match_dense() {
        // One-hot rows are maximally sparse.
        let rows: Vec<Vec<(u32, f32)>> = (0..14).map(|r| vec![((r % 5) as u32, 1.0)]).collect();
        let w = MvcWeights::from_rows(2, 5, rows).unwrap();
        assert!(w.is_sparse());
        for r in 0..14 {
            assert!((w.row_flat(r).sum() - 1.0).abs() < 1e-12);
        }
        let dense = MvcWeights::from_dense(1, 4, vec![0.25; 28], true);
        assert!(!dense.is_sparse());
        let mut rows = vec![0.0f32; 7 * 100];
        for r in 0..7 {
            rows[r * 100 + r] = 0.9;
            rows[r * 100 + r + 1] = 0.1 - 5e-8;
            rows[r * 100 + 50] = 5e-8;
        }
        let sparse = MvcWeights::from_dense(1, 100, rows, true);
        assert!(sparse.is_sparse());
        for r in 0..7 {
            assert_eq!(sparse.row_flat(r).entries().len(), 2);
            assert!((sparse.row_flat(r).sum() - 1.0).abs() < 1e-6);
        }
    }
}
