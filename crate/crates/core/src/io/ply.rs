//! Binary little-endian PLY splat files in the common 3DGS layout.
//!
//! Colors are stored as degree-0 spherical-harmonic coefficients, opacity as
//! a logit, scales as natural logs and rotations as `(w, x, y, z)`. The
//! optional `seg_0, seg_1` columns carry the segmentation feature and an
//! optional integer `binding` column marks a triangle-local set. Stored
//! rotations are normalized on read, as trained splat files rarely hold
//! unit quaternions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::types::{GaussianSplat, Quat, SplatFrame, SplatSet, Vec3};

/// Zeroth spherical-harmonic basis constant `1/(2√π)`.
pub const SH_C0: f32 = 0.282_094_8;

const BASE_PROPS: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

pub fn rgb_to_sh(c: f32) -> f32 {
    (c - 0.5) / SH_C0
}

pub fn sh_to_rgb(f: f32) -> f32 {
    f * SH_C0 + 0.5
}

/// `ln(o / (1 − o))`, infinite at 0 and 1.
pub fn logit(o: f32) -> f32 {
    (o / (1.0 - o)).ln()
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn read(self, r: &mut impl Read) -> std::io::Result<f64> {
        Ok(match self {
            Scalar::I8 => r.read_i8()? as f64,
            Scalar::U8 => r.read_u8()? as f64,
            Scalar::I16 => r.read_i16::<LittleEndian>()? as f64,
            Scalar::U16 => r.read_u16::<LittleEndian>()? as f64,
            Scalar::I32 => r.read_i32::<LittleEndian>()? as f64,
            Scalar::U32 => r.read_u32::<LittleEndian>()? as f64,
            Scalar::F32 => r.read_f32::<LittleEndian>()? as f64,
            Scalar::F64 => r.read_f64::<LittleEndian>()?,
        })
    }
}

/// Writes `set`. Feature columns are emitted when every splat has one; the
/// binding column when the set is triangle-local.
pub fn write_splats(path: &Path, set: &SplatSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_splats_to(&mut w, set).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_splats_to(w: &mut impl Write, set: &SplatSet) -> std::io::Result<()> {
    let with_feature = !set.is_empty() && set.splats.iter().all(|s| s.feature.is_some());
    let with_binding = set.frame == SplatFrame::TriangleLocal;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", set.len());
    for p in BASE_PROPS {
        header += &format!("property float {p}\n");
    }
    if with_feature {
        header += "property float seg_0\nproperty float seg_1\n";
    }
    if with_binding {
        header += "property uint binding\n";
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;
    for s in &set.splats {
        let vals = [
            s.mu.x,
            s.mu.y,
            s.mu.z,
            rgb_to_sh(s.color.x),
            rgb_to_sh(s.color.y),
            rgb_to_sh(s.color.z),
            logit(s.opacity),
            s.scale.x.ln(),
            s.scale.y.ln(),
            s.scale.z.ln(),
            s.rot.w,
            s.rot.i,
            s.rot.j,
            s.rot.k,
        ];
        for v in vals {
            w.write_f32::<LittleEndian>(v)?;
        }
        if with_feature {
            let f = s.feature.expect("checked");
            w.write_f32::<LittleEndian>(f[0])?;
            w.write_f32::<LittleEndian>(f[1])?;
        }
        if with_binding {
            w.write_u32::<LittleEndian>(s.binding.unwrap_or(u32::MAX))?;
        }
    }
    Ok(())
}

pub fn read_splats(path: &Path) -> Result<SplatSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_splats_from(&mut BufReader::new(file)).map_err(|e| match e {
        ReadError::Io(e) => Error::io(path, e),
        ReadError::Format(m) => Error::format(path, m),
    })
}

#[derive(Debug)]
pub(crate) enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn fmt_err(m: impl Into<String>) -> ReadError {
    ReadError::Format(m.into())
}

pub(crate) fn read_splats_from(r: &mut impl BufRead) -> std::result::Result<SplatSet, ReadError> {
    let mut line = String::new();
    let mut next_line = |r: &mut dyn BufRead| -> std::result::Result<String, ReadError> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(fmt_err("unexpected end of header"));
        }
        Ok(line.trim_end().to_string())
    };
    if next_line(r)? != "ply" {
        return Err(fmt_err("not a PLY file"));
    }
    let mut count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    loop {
        let l = next_line(r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "binary_little_endian", _] => {}
            ["format", f, ..] => return Err(fmt_err(format!("unsupported PLY format {f:?}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if seen_vertex {
                    // Later elements are ignored; they follow the vertex data.
                    in_vertex = false;
                    continue;
                }
                if *name != "vertex" {
                    return Err(fmt_err(format!("element {name:?} before vertex data is not supported")));
                }
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| fmt_err(format!("bad vertex count {n:?}")))?,
                );
                in_vertex = true;
                seen_vertex = true;
            }
            ["property", "list", ..] if in_vertex => return Err(fmt_err("list properties are not supported")),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| fmt_err(format!("unknown property type {ty:?}")))?;
                props.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(fmt_err(format!("unexpected header line {l:?}"))),
        }
    }
    let count = count.ok_or_else(|| fmt_err("missing vertex element"))?;
    let col = |name: &str| props.iter().position(|(n, _)| n == name);
    let mut base = [0usize; 14];
    for (k, name) in BASE_PROPS.iter().enumerate() {
        base[k] = col(name).ok_or_else(|| fmt_err(format!("missing property {name:?}")))?;
    }
    let seg = col("seg_0").zip(col("seg_1"));
    let binding = col("binding");
    let mut vals = vec![0f64; props.len()];
    let mut splats = Vec::with_capacity(count);
    for index in 0..count {
        for (v, (_, ty)) in vals.iter_mut().zip(&props) {
            *v = ty.read(r)?;
        }
        let g = |k: usize| vals[base[k]] as f32;
        let q = Quat::new(g(10), g(11), g(12), g(13));
        let norm = q.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(fmt_err(format!("splat {index}: rotation norm {norm}")));
        }
        splats.push(GaussianSplat {
            mu: Vec3::new(g(0), g(1), g(2)),
            rot: q / norm,
            scale: Vec3::new(g(7).exp(), g(8).exp(), g(9).exp()),
            opacity: sigmoid(g(6)),
            color: Vec3::new(sh_to_rgb(g(3)), sh_to_rgb(g(4)), sh_to_rgb(g(5))),
            feature: seg.map(|(a, b)| [vals[a] as f32, vals[b] as f32]),
            binding: binding.map(|b| vals[b] as u32),
        });
    }
    Ok(SplatSet {
        splats,
        frame: if binding.is_some() {
            SplatFrame::TriangleLocal
        } else {
            SplatFrame::Global
        },
    })
}
