//! OBJ geometry with JSON sidecars for skinned meshes and cages.
//!
//! `head.obj` pairs with `head.json`; only `v` and triangular `f` records
//! are read, and polygon faces are fanned into triangles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cage::{Cage, RootAnchor};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::types::{SkinnedMesh, Vec3};

/// `foo.obj` → `foo.json`.
pub fn sidecar_path(obj: &Path) -> PathBuf {
    obj.with_extension("json")
}

pub fn parse_obj(text: &str) -> std::result::Result<TriMesh, String> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f32> = tok
                    .take(3)
                    .map(|t| {
                        t.parse::<f32>()
                            .map_err(|_| format!("line {}: bad coordinate {t:?}", ln + 1))
                    })
                    .collect::<std::result::Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(format!("line {}: vertex needs 3 coordinates", ln + 1));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| format!("line {}: bad index {t:?}", ln + 1))?;
                        let n = vertices.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(format!("line {}: index {t} out of range", ln + 1));
                        }
                        Ok(i as u32)
                    })
                    .collect::<std::result::Result<_, String>>()?;
                if idx.len() < 3 {
                    return Err(format!("line {}: face needs at least 3 vertices", ln + 1));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh::new(vertices, faces))
}

pub fn format_obj(vertices: &[Vec3], faces: &[[u32; 3]]) -> String {
    let mut s = String::with_capacity(32 * (vertices.len() + faces.len()));
    for v in vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|m| Error::format(path, m))
}

pub fn write_obj(path: &Path, vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<()> {
    fs::write(path, format_obj(vertices, faces)).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshSidecar {
    joints: Vec<String>,
    weights: Vec<Vec<(u32, f32)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scalp_faces: Option<Vec<u32>>,
}

/// Reads `path` and its sidecar; without a sidecar the mesh is bound
/// rigidly to a single joint named `head`.
pub fn read_skinned_mesh(path: &Path) -> Result<SkinnedMesh> {
    let tri = read_obj(path)?;
    let side = sidecar_path(path);
    let mesh = if side.exists() {
        let s: MeshSidecar = read_json(&side)?;
        SkinnedMesh {
            vertices: tri.vertices,
            faces: tri.faces,
            joints: s.joints,
            skin_weights: s.weights,
            scalp_faces: s.scalp_faces,
        }
    } else {
        SkinnedMesh::rigid(tri.vertices, tri.faces, "head")
    };
    mesh.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(mesh)
}

pub fn write_skinned_mesh(path: &Path, mesh: &SkinnedMesh) -> Result<()> {
    write_obj(path, &mesh.vertices, &mesh.faces)?;
    write_json(
        &sidecar_path(path),
        &MeshSidecar {
            joints: mesh.joints.clone(),
            weights: mesh.skin_weights.clone(),
            scalp_faces: mesh.scalp_faces.clone(),
        },
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct AnchorJson {
    face: u32,
    bary: [f32; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct CageSidecar {
    inv_mass: Vec<f32>,
    root_anchor: Vec<Option<AnchorJson>>,
}

/// Reads a cage; without a sidecar every vertex is free with unit mass.
pub fn read_cage(path: &Path) -> Result<Cage> {
    let mut cage = Cage::from_mesh(read_obj(path)?);
    let side = sidecar_path(path);
    if side.exists() {
        let s: CageSidecar = read_json(&side)?;
        cage.inv_mass = s.inv_mass;
        cage.root_anchor = s
            .root_anchor
            .into_iter()
            .map(|a| {
                a.map(|a| RootAnchor {
                    face: a.face,
                    bary: a.bary,
                })
            })
            .collect();
    }
    cage.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(cage)
}

pub fn write_cage(path: &Path, cage: &Cage) -> Result<()> {
    write_obj(path, &cage.vertices, &cage.faces)?;
    write_json(
        &sidecar_path(path),
        &CageSidecar {
            inv_mass: cage.inv_mass.clone(),
            root_anchor: cage
                .root_anchor
                .iter()
                .map(|a| {
                    a.map(|a| AnchorJson {
                        face: a.face,
                        bary: a.bary,
                    })
                })
                .collect(),
        },
    )
}
