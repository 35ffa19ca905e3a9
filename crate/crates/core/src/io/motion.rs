//! Motion files: a JSON array of frames, each either
//! `{"joints": {"name": [16 floats, row-major]}}` or
//! `{"vertices": [x0, y0, z0, x1, ...]}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Mat4, MotionFrame, Vec3};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joints: Option<BTreeMap<String, Vec<f32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<f32>>,
}

fn frame_from_json(f: FrameJson, index: usize) -> std::result::Result<MotionFrame, String> {
    match (f.joints, f.vertices) {
        (Some(j), None) => j
            .into_iter()
            .map(|(name, m)| {
                if m.len() != 16 {
                    return Err(format!(
                        "frame {index}: joint {name:?} has {} values, expected 16",
                        m.len()
                    ));
                }
                Ok((name, Mat4::from_row_slice(&m)))
            })
            .collect::<std::result::Result<_, _>>()
            .map(MotionFrame::Joints),
        (None, Some(v)) => {
            if v.len() % 3 != 0 {
                return Err(format!(
                    "frame {index}: vertex array length {} is not a multiple of 3",
                    v.len()
                ));
            }
            Ok(MotionFrame::Vertices(
                v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            ))
        }
        _ => Err(format!(
            "frame {index}: expected exactly one of \"joints\" or \"vertices\""
        )),
    }
}

fn frame_to_json(f: &MotionFrame) -> FrameJson {
    match f {
        MotionFrame::Joints(map) => FrameJson {
            joints: Some(
                map.iter()
                    .map(|(k, m)| (k.clone(), m.transpose().as_slice().to_vec()))
                    .collect(),
            ),
            vertices: None,
        },
        MotionFrame::Vertices(v) => FrameJson {
            joints: None,
            vertices: Some(v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()),
        },
    }
}

pub fn parse_motion(text: &str) -> std::result::Result<Vec<MotionFrame>, String> {
    let frames: Vec<FrameJson> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| frame_from_json(f, i))
        .collect()
}

pub fn format_motion(frames: &[MotionFrame]) -> String {
    let json: Vec<FrameJson> = frames.iter().map(frame_to_json).collect();
    serde_json::to_string(&json).expect("serializable")
}

pub fn read_motion(path: &Path) -> Result<Vec<MotionFrame>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let frames = parse_motion(&text).map_err(|m| Error::format(path, m))?;
    for (i, f) in frames.iter().enumerate() {
        f.validate()
            .map_err(|e| Error::format(path, format!("frame {i}: {e}")))?;
    }
    Ok(frames)
}

pub fn write_motion(path: &Path, frames: &[MotionFrame]) -> Result<()> {
    fs::write(path, format_motion(frames)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn joint_matrices_are_row_major() {
        let text = r#"[{"joints": {"head": [1,0,0,5, 0,1,0,6, 0,0,1,7, 0,0,0,1]}}]"#;
        let f = parse_motion(text).unwrap();
        let MotionFrame::Joints(m) = &f[0] else { panic!() };
        assert_eq!(m["head"][(0, 3)], 5.0);
        assert_eq!(m["head"][(2, 3)], 7.0);
    }

    #[test]
    fn roundtrip_both_kinds() {
        let mut frames = fixtures::nod_motion(0.1, 3, 0.2, 10.0);
        frames.push(MotionFrame::Vertices(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::zeros()]));
        assert_eq!(parse_motion(&format_motion(&frames)).unwrap(), frames);
    }

    #[test]
    fn malformed_frames_are_rejected() {
        assert!(parse_motion(r#"[{"joints": {"a": [1,2]}}]"#).is_err());
        assert!(parse_motion(r#"[{"vertices": [1,2]}]"#).is_err());
        assert!(parse_motion(r#"[{}]"#).is_err());
        assert!(parse_motion(r#"[{"joints": {}, "vertices": []}]"#).is_err());
        assert!(parse_motion(r#"{"joints": {}}"#).is_err());
    }
}
