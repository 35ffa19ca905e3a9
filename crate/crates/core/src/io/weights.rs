//! Binary cache of baked cage weights.
//!
//! Layout (little-endian): magic `MVCW`, version `u32 = 1`, splat count
//! `u64`, cage vertex count `u64`, then `7·N` rows of `count u32` followed
//! by `count` pairs of `(index u32, weight f32)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::mvc::{MvcWeights, POINTS_PER_SPLAT};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"MVCW";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn write_weights_to(w: &mut impl Write, weights: &MvcWeights) -> std::io::Result<()> {
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_u32::<LittleEndian>(WEIGHTS_VERSION)?;
    w.write_u64::<LittleEndian>(weights.n_splats() as u64)?;
    w.write_u64::<LittleEndian>(weights.n_cage_verts() as u64)?;
    for r in 0..weights.n_rows() {
        let entries = weights.row_flat(r).entries();
        w.write_u32::<LittleEndian>(entries.len() as u32)?;
        for (i, v) in entries {
            w.write_u32::<LittleEndian>(i)?;
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn write_weights(path: &Path, weights: &MvcWeights) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_weights_to(&mut w, weights).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_weights_from(r: &mut impl Read) -> std::result::Result<MvcWeights, String> {
    let io = |e: std::io::Error| e.to_string();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != WEIGHTS_MAGIC {
        return Err("bad magic (expected MVCW)".into());
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != WEIGHTS_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let m = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let n_rows = n
        .checked_mul(POINTS_PER_SPLAT)
        .ok_or_else(|| format!("splat count {n} too large"))?;
    let mut rows = Vec::with_capacity(n_rows.min(1 << 24));
    for _ in 0..n_rows {
        let count = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        if count > m {
            return Err(format!("row has {count} entries for {m} cage vertices"));
        }
        let mut row = Vec::with_capacity(count);
        for _ in 0..count {
            let i = r.read_u32::<LittleEndian>().map_err(io)?;
            let v = r.read_f32::<LittleEndian>().map_err(io)?;
            row.push((i, v));
        }
        rows.push(row);
    }
    MvcWeights::from_rows(n, m, rows).map_err(|e| e.to_string())
}

pub fn read_weights(path: &Path) -> Result<MvcWeights> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights_from(&mut BufReader::new(file)).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mvc::{bake_weights, bake_weights_with, BakeOptions};
    use crate::types::{GaussianSplat, Quat, SplatSet, Vec3};
    use std::io::Cursor;

    fn hair() -> SplatSet {
        SplatSet::global(
            (0..6)
                .map(|i| {
                    GaussianSplat::new(
                        Vec3::new(0.05 * i as f32, 0.1, -0.1),
                        Quat::identity(),
                        Vec3::new(0.05, 0.02, 0.01),
                        1.0,
                        Vec3::zeros(),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn roundtrip_dense_and_sparse() {
        let cage = fixtures::icosphere(Vec3::zeros(), 1.0, 1);
        for truncate in [false, true] {
            let w = bake_weights_with(&hair(), &cage.vertices, &cage.faces, BakeOptions { truncate }).unwrap();
            let mut buf = Vec::new();
            write_weights_to(&mut buf, &w).unwrap();
            assert_eq!(&buf[..4], b"MVCW");
            assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
            assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 6);
            assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 42);
            let back = read_weights_from(&mut Cursor::new(&buf)).unwrap();
            assert_eq!(back.n_splats(), 6);
            for r in 0..w.n_rows() {
                assert_eq!(back.row_flat(r).entries(), w.row_flat(r).entries());
            }
            let mut again = Vec::new();
            write_weights_to(&mut again, &back).unwrap();
            assert_eq!(again, buf);
        }
    }

    #[test]
    fn corrupt_caches_are_rejected() {
        let cage = fixtures::icosphere(Vec3::zeros(), 1.0, 0);
        let w = bake_weights(&hair(), &cage.vertices, &cage.faces).unwrap();
        let mut buf = Vec::new();
        write_weights_to(&mut buf, &w).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_weights_from(&mut Cursor::new(&bad)).is_err());
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(read_weights_from(&mut Cursor::new(&bad)).is_err());
        buf.truncate(buf.len() - 1);
        assert!(read_weights_from(&mut Cursor::new(&buf)).is_err());
    }
}
