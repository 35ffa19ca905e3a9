use bitvec::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::bounds;
use crate::types::Vec3;

/// Regular occupancy grid. Voxel `(i, j, k)` spans
/// `origin + [i, i+1) × [j, j+1) × [k, k+1)` in units of `voxel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub voxel_size: f32,
    pub dims: [usize; 3],
    pub occupancy: BitVec,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, voxel_size: f32, dims: [usize; 3]) -> Self {
        Self {
            origin,
            voxel_size,
            dims,
            occupancy: bitvec![0; dims[0] * dims[1] * dims[2]],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let r = index / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    /// Occupancy with everything outside the grid reading as empty.
    #[inline]
    pub fn get_signed(&self, c: [i64; 3]) -> bool {
        if c.iter().zip(&self.dims).any(|(&v, &d)| v < 0 || v >= d as i64) {
            return false;
        }
        self.get(c[0] as usize, c[1] as usize, c[2] as usize)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.index(i, j, k);
        self.occupancy.set(idx, v);
    }

    pub fn count(&self) -> usize {
        self.occupancy.count_ones()
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let c = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(c >= 0.0 && (c as usize) < self.dims[a]) {
                return None;
            }
            out[a] = c as usize;
        }
        Some(out)
    }

    /// Copy with `pad` empty layers added on every side.
    pub fn padded(&self, pad: usize) -> Self {
        let dims = self.dims.map(|d| d + 2 * pad);
        let mut out = Self::empty(
            self.origin - Vec3::repeat(pad as f32 * self.voxel_size),
            self.voxel_size,
            dims,
        );
        for idx in self.occupancy.iter_ones() {
            let [i, j, k] = self.coords(idx);
            out.set(i + pad, j + pad, k + pad, true);
        }
        out
    }

    /// One step of 26-neighborhood dilation.
    pub fn dilate(&mut self) {
        self.morph(true);
    }

    /// One step of 26-neighborhood erosion; outside the grid counts as empty.
    pub fn erode(&mut self) {
        self.morph(false);
    }

    // The 3×3×3 cube is separable: three passes of a width-3 line filter.
    fn morph(&mut self, dilate: bool) {
        for axis in 0..3 {
            let src = self.occupancy.clone();
            let stride = match axis {
                0 => 1,
                1 => self.dims[0],
                _ => self.dims[0] * self.dims[1],
            };
            let n = self.dims[axis];
            for idx in 0..src.len() {
                let c = self.coords(idx)[axis];
                let lo = if c > 0 { Some(src[idx - stride]) } else { None };
                let hi = if c + 1 < n { Some(src[idx + stride]) } else { None };
                let v = src[idx];
                let out = if dilate {
                    v || lo.unwrap_or(false) || hi.unwrap_or(false)
                } else {
                    v && lo.unwrap_or(false) && hi.unwrap_or(false)
                };
                self.occupancy.set(idx, out);
            }
        }
    }
}

/// Occupancy of `points`, dilated `dilation` times and closed once.
///
/// The grid bounds the points with `dilation + 1` voxels of padding.
pub fn voxelize(points: &[Vec3], voxel_size: f32, dilation: u32) -> Result<VoxelGrid> {
    if points.is_empty() {
        return Err(Error::EmptyInput("points"));
    }
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::invalid("voxel_size", "must be positive"));
    }
    let (lo, hi) = bounds(points);
    let pad = dilation as usize + 1;
    let cells = |a: usize| ((hi[a] - lo[a]) / voxel_size).floor() as usize + 1;
    let dims = [cells(0) + 2 * pad, cells(1) + 2 * pad, cells(2) + 2 * pad];
    let origin = lo - Vec3::repeat(pad as f32 * voxel_size);
    let mut grid = VoxelGrid::empty(origin, voxel_size, dims);
    for p in points {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let v = ((p[a] - lo[a]) / voxel_size).floor().max(0.0) as usize;
            c[a] = v.min(cells(a) - 1) + pad;
        }
        grid.set(c[0], c[1], c[2], true);
    }
    for _ in 0..dilation {
        grid.dilate();
    }
    grid.dilate();
    grid.erode();
    Ok(grid)
}
