//! Flat `key = value` settings files. Keys mirror [`SolverConfig`] field
//! names plus the cage-building and decomposition parameters; `#` starts a
//! comment.

use std::fs;
use std::path::Path;

use crate::cage::{CageOptions, DEFAULT_DILATION, DEFAULT_TARGET_VERTICES};
use crate::error::{Error, Result};
use crate::types::{CollisionMode, SolverConfig, Vec3};

/// Default root capture radius in meters; the cage's inner sheet sits a few
/// voxels beneath the scalp, so this must exceed ~3 default voxels.
pub const DEFAULT_ROOT_RADIUS: f32 = 0.04;
pub const DEFAULT_BOUNDARY_RADIUS: f32 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub solver: SolverConfig,
    pub voxel_size: Option<f32>,
    pub dilation: u32,
    pub target_verts: usize,
    /// Cage vertices closer than this to the scalp become kinematic.
    pub root_radius: f32,
    pub boundary_radius: f32,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            voxel_size: None,
            dilation: DEFAULT_DILATION,
            target_verts: DEFAULT_TARGET_VERTICES,
            root_radius: DEFAULT_ROOT_RADIUS,
            boundary_radius: DEFAULT_BOUNDARY_RADIUS,
        }
    }
}

impl Settings {
    pub fn cage_options(&self) -> CageOptions {
        CageOptions {
            voxel_size: self.voxel_size,
            dilation: self.dilation,
            target_vertices: self.target_verts,
            ..Default::default()
        }
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        let s = &mut self.solver;
        match key {
            "dt" => s.dt = num(key, value)?,
            "substeps" => s.substeps = num(key, value)?,
            "iterations" => s.iterations = num(key, value)?,
            "gravity" => s.gravity = parse_vec3(value).ok_or_else(|| format!("gravity: cannot parse {value:?}"))?,
            "damping" => s.damping = num(key, value)?,
            "stretch_compliance" => s.stretch_compliance = num(key, value)?,
            "bend_compliance" => s.bend_compliance = num(key, value)?,
            "volume_compliance" => {
                s.volume_compliance = match value {
                    "none" | "off" => None,
                    v => Some(num(key, v)?),
                }
            }
            "collision_margin" => s.collision_margin = num(key, value)?,
            "collision" => {
                s.collision = match value {
                    "proxy" => CollisionMode::Proxy,
                    "direct" => CollisionMode::Direct,
                    "off" => CollisionMode::Off,
                    v => return Err(format!("collision: expected proxy, direct or off, got {v:?}")),
                }
            }
            "max_splats_warn" => s.max_splats_warn = num(key, value)?,
            "voxel_size" => {
                self.voxel_size = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "dilation" => self.dilation = num(key, value)?,
            "target_verts" => self.target_verts = num(key, value)?,
            "root_radius" => self.root_radius = num(key, value)?,
            "boundary_radius" => self.boundary_radius = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut out = Self::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", ln + 1))?;
            out.set(k.trim(), v.trim())
                .map_err(|e| format!("line {}: {e}", ln + 1))?;
        }
        out.solver.validate().map_err(|e| e.to_string())?;
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let g = s.gravity;
        let collision = match s.collision {
            CollisionMode::Proxy => "proxy",
            CollisionMode::Direct => "direct",
            CollisionMode::Off => "off",
        };
        let volume = s.volume_compliance.map_or("none".to_string(), |v| v.to_string());
        let voxel = self.voxel_size.map_or("auto".to_string(), |v| v.to_string());
        format!(
            "dt = {}\nsubsteps = {}\niterations = {}\ngravity = {},{},{}\ndamping = {}\n\
             stretch_compliance = {}\nbend_compliance = {}\nvolume_compliance = {volume}\n\
             collision_margin = {}\ncollision = {collision}\nmax_splats_warn = {}\n\
             voxel_size = {voxel}\ndilation = {}\ntarget_verts = {}\nroot_radius = {}\nboundary_radius = {}\n",
            s.dt,
            s.substeps,
            s.iterations,
            g.x,
            g.y,
            g.z,
            s.damping,
            s.stretch_compliance,
            s.bend_compliance,
            s.collision_margin,
            s.max_splats_warn,
            self.dilation,
            self.target_verts,
            self.root_radius,
            self.boundary_radius,
        )
    }
}

/// `"x,y,z"` or `"x y z"`.
pub fn parse_vec3(s: &str) -> Option<Vec3> {
    let v: Vec<f32> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()?;
    (v.len() == 3).then(|| Vec3::new(v[0], v[1], v[2]))
}
