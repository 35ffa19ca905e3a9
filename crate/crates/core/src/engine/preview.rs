//! Inspection-quality splat preview: every splat is a flat disc of its
//! largest scale, depth-tested per pixel.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::types::{orthonormality, Mat3, Mat4, SplatSet, Vec3};

/// Pinhole camera looking down its +z axis; image `v` grows downward with
/// camera `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// World-to-camera rigid transform.
    pub pose: Mat4,
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("camera", "focal lengths must be > 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", "image size must be non-zero"));
        }
        let r: Mat3 = self.pose.fixed_view::<3, 3>(0, 0).into_owned();
        let (deviation, det) = orthonormality(&r);
        if deviation > 1e-5 || det <= 0.0 {
            return Err(Error::NonOrthonormal { deviation });
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target` with the given world up vector.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_y: f32, width: u32, height: u32) -> Self {
        let z = (target - eye).normalize();
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let r = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye);
        let mut pose = Mat4::identity();
        pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        pose.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let f = 0.5 * height as f32 / (0.5 * fov_y).tan();
        Self {
            pose,
            fx: f,
            fy: f,
            cx: 0.5 * width as f32,
            cy: 0.5 * height as f32,
            width,
            height,
        }
    }

    fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.pose.fixed_view::<3, 3>(0, 0) * p + self.pose.fixed_view::<3, 1>(0, 3)
    }
}

/// Linear RGB and depth buffers, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewImage {
    pub width: u32,
    pub height: u32,
    pub color: Vec<Vec3>,
    /// Camera-space z of the visible splat; `+∞` where nothing was drawn.
    pub depth: Vec<f32>,
}

impl PreviewImage {
    pub fn pixel(&self, x: u32, y: u32) -> (Vec3, f32) {
        let i = (y * self.width + x) as usize;
        (self.color[i], self.depth[i])
    }

    pub fn to_rgb8(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width, self.height, |x, y| {
            let c = self.pixel(x, y).0;
            Rgb([0, 1, 2].map(|k| (c[k].clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save(path)
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Projects global splats through `camera`. Splats behind the camera are
/// skipped; ties in depth keep the earlier splat.
pub fn preview_project(splats: &SplatSet, camera: &Camera) -> PreviewImage {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut color = vec![Vec3::zeros(); w * h];
    let mut depth = vec![f32::INFINITY; w * h];
    for s in &splats.splats {
        let pc = camera.to_camera(&s.mu);
        let z = pc.z;
        if !(z > 0.0) {
            continue;
        }
        let u = camera.fx * pc.x / z + camera.cx;
        let v = camera.fy * pc.y / z + camera.cy;
        let r = camera.fx.max(camera.fy) * s.scale.max() / z;
        if !(u.is_finite() && v.is_finite() && r.is_finite()) {
            continue;
        }
        let c = s.color * s.opacity;
        let x0 = (u - r - 0.5).floor().max(0.0) as i64;
        let x1 = ((u + r - 0.5).ceil() as i64).min(w as i64 - 1);
        let y0 = (v - r - 0.5).floor().max(0.0) as i64;
        let y1 = ((v + r - 0.5).ceil() as i64).min(h as i64 - 1);
        let (hit_x, hit_y) = (u.floor() as i64, v.floor() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f32 + 0.5 - u, y as f32 + 0.5 - v);
                // The pixel under the center is always drawn.
                if dx * dx + dy * dy > r * r && !(x == hit_x && y == hit_y) {
                    continue;
                }
                let i = y as usize * w + x as usize;
                if z < depth[i] {
                    depth[i] = z;
                    color[i] = c;
                }
            }
        }
    }
    PreviewImage {
        width: camera.width,
        height: camera.height,
        color,
        depth,
    }
}
