use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::io::write_splats;
use crate::types::MotionFrame;

use super::preview::{preview_project, Camera};
use super::{Scene, Simulator};

/// Per-frame stage times in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameTiming {
    pub pose_ms: f64,
    pub simulate_ms: f64,
    pub deform_ms: f64,
    pub export_ms: f64,
    /// Wall time of the whole frame.
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingReport {
    pub frames: Vec<FrameTiming>,
}

impl TimingReport {
    fn mean(&self, f: impl Fn(&FrameTiming) -> f64) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(f).sum::<f64>() / self.frames.len() as f64
    }

    /// Mean of each stage plus the total, over all frames.
    pub fn mean_frame(&self) -> FrameTiming {
        FrameTiming {
            pose_ms: self.mean(|t| t.pose_ms),
            simulate_ms: self.mean(|t| t.simulate_ms),
            deform_ms: self.mean(|t| t.deform_ms),
            export_ms: self.mean(|t| t.export_ms),
            total_ms: self.mean(|t| t.total_ms),
        }
    }

    /// Mean simulate + deform time, the real-time budget figure.
    pub fn mean_sim_deform_ms(&self) -> f64 {
        self.mean(|t| t.simulate_ms + t.deform_ms)
    }

    pub fn fps(&self) -> f64 {
        let t = self.mean(|t| t.total_ms);
        if t > 0.0 {
            1000.0 / t
        } else {
            f64::INFINITY
        }
    }

    /// Human-readable per-stage summary.
    pub fn summary(&self) -> String {
        let m = self.mean_frame();
        format!(
            "frames: {}\npose_ms: {:.3}\nsimulate_ms: {:.3}\ndeform_ms: {:.3}\nexport_ms: {:.3}\ntotal_ms: {:.3}\nsim+deform_ms: {:.3}\nfps: {:.2}\n",
            self.frames.len(),
            m.pose_ms,
            m.simulate_ms,
            m.deform_ms,
            m.export_ms,
            m.total_ms,
            self.mean_sim_deform_ms(),
            self.fps(),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write `frame_NNNN.ply` per frame.
    pub write_frames: bool,
    /// Also write `frame_NNNN.png` previews through this camera.
    pub preview: Option<Camera>,
}

/// `frame_0000.ply`, `frame_0001.ply`, …
pub fn frame_file_name(index: usize, ext: &str) -> String {
    format!("frame_{index:04}.{ext}")
}

fn check_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe: PathBuf = dir.join(".cagehair-write-test");
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Simulates `frames` and exports each one (bald ∪ hair) into `out_dir`.
/// The directory is checked for writability before any simulation.
pub fn run_sequence(scene: &Scene, frames: &[MotionFrame], out_dir: &Path, opts: &RunOptions) -> Result<TimingReport> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("motion frames"));
    }
    if opts.write_frames || opts.preview.is_some() {
        check_writable(out_dir)?;
    }
    if let Some(cam) = &opts.preview {
        cam.validate()?;
    }
    let mut sim = Simulator::new(scene)?;
    let mut report = TimingReport::default();
    for (i, motion) in frames.iter().enumerate() {
        let start = Instant::now();
        let (out, stages) = sim.step(motion)?;
        let t_export = Instant::now();
        if opts.write_frames || opts.preview.is_some() {
            let merged = out.merged();
            if opts.write_frames {
                write_splats(&out_dir.join(frame_file_name(i, "ply")), &merged)?;
            }
            if let Some(cam) = &opts.preview {
                preview_project(&merged, cam).save_png(&out_dir.join(frame_file_name(i, "png")))?;
            }
        }
        let end = Instant::now();
        report.frames.push(FrameTiming {
            pose_ms: stages.pose.as_secs_f64() * 1e3,
            simulate_ms: stages.simulate.as_secs_f64() * 1e3,
            deform_ms: stages.deform.as_secs_f64() * 1e3,
            export_ms: (end - t_export).as_secs_f64() * 1e3,
            total_ms: (end - start).as_secs_f64() * 1e3,
        });
    }
    Ok(report)
}
