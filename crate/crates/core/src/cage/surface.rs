use std::collections::{HashMap, VecDeque};

use bitvec::prelude::*;

use super::voxel::VoxelGrid;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::types::Vec3;

const NEIGHBORS6: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn step(grid: &VoxelGrid, idx: usize, d: [i64; 3]) -> Option<usize> {
    let c = grid.coords(idx);
    let mut n = [0usize; 3];
    for a in 0..3 {
        let v = c[a] as i64 + d[a];
        if v < 0 || v >= grid.dims[a] as i64 {
            return None;
        }
        n[a] = v as usize;
    }
    Some(grid.index(n[0], n[1], n[2]))
}

/// Number of 6-connected components of occupied voxels.
pub fn count_components(grid: &VoxelGrid) -> usize {
    let mut seen = bitvec![0; grid.occupancy.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in grid.occupancy.iter_ones() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen.set(start, true);
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            for d in NEIGHBORS6 {
                if let Some(n) = step(grid, idx, d) {
                    if grid.occupancy[n] && !seen[n] {
                        seen.set(n, true);
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    components
}

/// Occupies every empty voxel not 6-connected to the grid border.
fn fill_cavities(grid: &mut VoxelGrid) {
    let mut outside = bitvec![0; grid.occupancy.len()];
    let mut queue = VecDeque::new();
    for idx in 0..grid.occupancy.len() {
        let c = grid.coords(idx);
        let border = (0..3).any(|a| c[a] == 0 || c[a] + 1 == grid.dims[a]);
        if border && !grid.occupancy[idx] {
            outside.set(idx, true);
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        for d in NEIGHBORS6 {
            if let Some(n) = step(grid, idx, d) {
                if !grid.occupancy[n] && !outside[n] {
                    outside.set(n, true);
                    queue.push_back(n);
                }
            }
        }
    }
    let filled = !outside;
    grid.occupancy = filled;
}

/// Whether the voxels of one value inside a 2×2×2 block form more than one
/// 6-connected group.
fn split_in_block(cells: [bool; 8], value: bool) -> bool {
    let members: Vec<usize> = (0..8).filter(|&i| cells[i] == value).collect();
    if members.len() <= 1 {
        return false;
    }
    let mut reached = 1u8 << members[0];
    let mut frontier = vec![members[0]];
    while let Some(c) = frontier.pop() {
        for bit in [1, 2, 4] {
            let n = c ^ bit;
            if cells[n] == value && reached & (1 << n) == 0 {
                reached |= 1 << n;
                frontier.push(n);
            }
        }
    }
    members.iter().any(|&m| reached & (1 << m) == 0)
}

/// Fills every 2×2×2 block whose occupied or empty voxels are split; these
/// are exactly the blocks whose shared corner or edges would be
/// non-manifold on the boundary surface. Returns whether anything changed.
fn fix_nonmanifold(grid: &mut VoxelGrid) -> bool {
    let [nx, ny, nz] = grid.dims;
    let mut changed = false;
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut cells = [false; 8];
                for (b, cell) in cells.iter_mut().enumerate() {
                    *cell = grid.get(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
                }
                if !cells.iter().any(|&c| c) || cells.iter().all(|&c| c) {
                    continue;
                }
                if split_in_block(cells, true) || split_in_block(cells, false) {
                    for b in 0..8 {
                        grid.set(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1), true);
                    }
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Closed, outward-oriented boundary surface of a single connected voxel
/// region, two triangles per exposed voxel face, with shared corners welded.
///
/// Enclosed cavities are filled, and corners or edges where the region
/// would touch itself are thickened first, so the result is a 2-manifold.
pub fn extract_surface(grid: &VoxelGrid) -> Result<TriMesh> {
    if grid.count() == 0 {
        return Err(Error::EmptyInput("voxel occupancy"));
    }
    let components = count_components(grid);
    if components != 1 {
        return Err(Error::DisconnectedOccupancy { components });
    }
    // Room for thickening without touching the border.
    let mut g = grid.padded(2);
    loop {
        fill_cavities(&mut g);
        if !fix_nonmanifold(&mut g) {
            break;
        }
    }

    let [nx, ny, _] = g.dims;
    let corner_id = |c: [usize; 3]| c[0] + (nx + 1) * (c[1] + (ny + 1) * c[2]);
    let mut welded: HashMap<usize, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vertex = |c: [usize; 3], vertices: &mut Vec<Vec3>| -> u32 {
        *welded.entry(corner_id(c)).or_insert_with(|| {
            vertices.push(g.origin + Vec3::new(c[0] as f32, c[1] as f32, c[2] as f32) * g.voxel_size);
            (vertices.len() - 1) as u32
        })
    };
    for idx in g.occupancy.iter_ones() {
        let c = g.coords(idx);
        for a in 0..3 {
            let (b, cc) = ((a + 1) % 3, (a + 2) % 3);
            for positive in [true, false] {
                let mut nb = c.map(|v| v as i64);
                nb[a] += if positive { 1 } else { -1 };
                if g.get_signed(nb) {
                    continue;
                }
                // Quad corners counter-clockwise around the outward normal.
                let mut quad = [[0usize; 3]; 4];
                for (q, (db, dc)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                    let mut p = c;
                    p[a] += positive as usize;
                    p[b] += db;
                    p[cc] += dc;
                    quad[q] = p;
                }
                if !positive {
                    quad.reverse();
                }
                let ids = quad.map(|p| vertex(p, &mut vertices));
                faces.push([ids[0], ids[1], ids[2]]);
                faces.push([ids[0], ids[2], ids[3]]);
            }
        }
    }
    Ok(TriMesh::new(vertices, faces))
}
