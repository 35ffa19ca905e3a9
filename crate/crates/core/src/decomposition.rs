//! Hair/bald decomposition helpers: symmetric Chamfer distance between
//! splat position sets and boundary-aware reassignment of hair splats that
//! look like skin.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{GaussianSplat, SplatSet, Vec3};

type Tree = ImmutableKdTree<f64, 3>;

fn build_tree(points: &[Vec3]) -> Result<Tree> {
    let entries: Vec<[f64; 3]> = points.iter().map(|p| [p.x as f64, p.y as f64, p.z as f64]).collect();
    Tree::new_from_slice(&entries).map_err(|e| Error::invalid("points", e.to_string()))
}

fn nearest_sq(tree: &Tree, p: &Vec3) -> f64 {
    tree.query(&[p.x as f64, p.y as f64, p.z as f64])
        .nearest_one::<SquaredEuclidean<f64>>()
        .execute()
        .distance
}

fn mean_nearest_sq(from: &[Vec3], to: &Tree) -> f64 {
    from.par_iter().map(|p| nearest_sq(to, p)).sum::<f64>() / from.len() as f64
}

/// Mean squared nearest distance from `a` to `b` plus the same from `b` to `a`.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("chamfer point set"));
    }
    let (ta, tb) = (build_tree(a)?, build_tree(b)?);
    Ok(mean_nearest_sq(a, &tb) + mean_nearest_sq(b, &ta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReassignConfig {
    /// Hair splats within this distance of a bald splat center are boundary.
    pub boundary_radius: f32,
    pub color_weight: f32,
    pub scale_weight: f32,
}

impl Default for ReassignConfig {
    fn default() -> Self {
        Self {
            boundary_radius: 0.01,
            color_weight: 1.0,
            scale_weight: 1.0,
        }
    }
}

impl ReassignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.boundary_radius > 0.0) {
            return Err(Error::invalid("boundary_radius", "must be > 0"));
        }
        if !(self.color_weight >= 0.0 && self.scale_weight >= 0.0) {
            return Err(Error::invalid("feature weights", "must be >= 0"));
        }
        if self.color_weight == 0.0 && self.scale_weight == 0.0 {
            return Err(Error::invalid(
                "feature weights",
                "color and scale weights are both zero",
            ));
        }
        Ok(())
    }

    /// `[c_w · rgb, s_w · ln(scale)]`.
    pub fn feature(&self, s: &GaussianSplat) -> [f64; 6] {
        let (cw, sw) = (self.color_weight as f64, self.scale_weight as f64);
        [
            cw * s.color.x as f64,
            cw * s.color.y as f64,
            cw * s.color.z as f64,
            sw * (s.scale.x as f64).ln(),
            sw * (s.scale.y as f64).ln(),
            sw * (s.scale.z as f64).ln(),
        ]
    }

    fn center<'a>(&self, splats: impl Iterator<Item = &'a GaussianSplat>) -> [f64; 6] {
        let mut sum = [0.0; 6];
        let mut n = 0usize;
        for s in splats {
            for (acc, f) in sum.iter_mut().zip(self.feature(s)) {
                *acc += f;
            }
            n += 1;
        }
        sum.map(|v| v / n as f64)
    }
}

/// `(boundary, interior)` hair indices, both ascending: a splat is boundary
/// iff some bald center lies within `boundary_radius` of its center.
pub fn split_boundary(hair: &SplatSet, bald: &SplatSet, cfg: &ReassignConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    if hair.is_empty() {
        return Err(Error::EmptyInput("hair set"));
    }
    if bald.is_empty() {
        return Err(Error::EmptyInput("bald set"));
    }
    let tree = build_tree(&bald.positions())?;
    let r2 = cfg.boundary_radius as f64 * cfg.boundary_radius as f64;
    let flags: Vec<bool> = hair.splats.par_iter().map(|s| nearest_sq(&tree, &s.mu) <= r2).collect();
    let (boundary, interior): (Vec<usize>, Vec<usize>) = (0..hair.len()).partition(|&i| flags[i]);
    Ok((boundary, interior))
}

fn dist2(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reclassifies boundary splats against the interior-hair and bald feature
/// means. Splats strictly nearer the bald mean are removed. Returns the
/// remaining hair (input order kept) and the removed indices (ascending).
pub fn reassign(
    hair: &SplatSet,
    bald: &SplatSet,
    boundary: &[usize],
    cfg: &ReassignConfig,
) -> Result<(SplatSet, Vec<usize>)> {
    cfg.validate()?;
    if bald.is_empty() {
        return Err(Error::EmptyInput("bald set"));
    }
    let mut is_boundary = vec![false; hair.len()];
    for &i in boundary {
        if i >= hair.len() {
            return Err(Error::IndexOutOfRange {
                what: "boundary splat",
                index: i,
                len: hair.len(),
            });
        }
        is_boundary[i] = true;
    }
    if is_boundary.iter().all(|&b| b) {
        return Err(Error::NoInteriorHair);
    }
    let hair_center = cfg.center(
        hair.splats
            .iter()
            .zip(&is_boundary)
            .filter(|(_, &b)| !b)
            .map(|(s, _)| s),
    );
    let skin_center = cfg.center(bald.splats.iter());
    let mut expelled = Vec::new();
    let mut kept = Vec::with_capacity(hair.len());
    for (i, s) in hair.splats.iter().enumerate() {
        if is_boundary[i] {
            let f = cfg.feature(s);
            if dist2(&f, &skin_center) < dist2(&f, &hair_center) {
                expelled.push(i);
                continue;
            }
        }
        kept.push(s.clone());
    }
    Ok((
        SplatSet {
            splats: kept,
            frame: hair.frame,
        },
        expelled,
    ))
}
