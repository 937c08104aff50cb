//! Pinhole depth camera with radial distortion.
//!
//! Forward chain: camera point → lens plane (divide by z) → distortion → pixels
//! via the intrinsic matrix. The inverse chain recovers the camera point from a
//! pixel and its z-depth. Pixel centers sit at integer coordinates.

use rayon::prelude::*;

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::scene::{Ray, WorldSnapshot};

use super::distortion::DistortionModel;

/// Largest forward-model residual accepted for a precomputed pixel ray.
pub const LENS_TABLE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub distortion: DistortionModel,
    pub max_range: f64,
    /// Camera frame (z forward, x right, y down) → vehicle.
    pub mount: RigidTransform,
}

/// Rotation taking camera axes (z forward, x right, y down) to body axes (x forward, y left, z up).
pub fn camera_to_body() -> Mat3 {
    Mat3::from_cols(-Vec3::Y, -Vec3::Z, Vec3::X)
}

impl CameraSpec {
    /// Camera → vehicle mount for a camera whose optical axis points along the body x axis
    /// after rotating by yaw/pitch/roll (degrees).
    pub fn optical_mount(yaw: f64, pitch: f64, roll: f64, translation: Vec3) -> RigidTransform {
        let body = RigidTransform::from_ypr_degrees(yaw, pitch, roll, translation);
        body.compose(&RigidTransform::new(camera_to_body(), Vec3::ZERO).expect("axis permutation is a rotation"))
    }

    /// Intrinsics for a horizontal field of view in degrees with square pixels and a centered principal point.
    pub fn with_horizontal_fov(
        width: usize,
        height: usize,
        hfov_deg: f64,
        max_range: f64,
        mount: RigidTransform,
    ) -> Self {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self {
            width,
            height,
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            distortion: DistortionModel::None,
            max_range,
            mount,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::contract("camera image must be non-empty"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::contract("camera focal lengths must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::contract("camera principal point must lie inside the image"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::contract("camera max_range must be positive"));
        }
        Ok(())
    }

    /// Pixel → distorted image-plane coordinates (inverse intrinsics).
    pub fn pixel_to_image(&self, u: f64, v: f64) -> [f64; 2] {
        [(u - self.cx) / self.fx, (v - self.cy) / self.fy]
    }

    /// Image-plane → pixel (intrinsic matrix).
    pub fn image_to_pixel(&self, p: [f64; 2]) -> [f64; 2] {
        [self.fx * p[0] + self.cx, self.fy * p[1] + self.cy]
    }

    /// Camera-frame point → pixel, or `None` behind the camera.
    pub fn project(&self, p: Vec3) -> Option<[f64; 2]> {
        if !(p.z > 0.0) {
            return None;
        }
        let lens = [p.x / p.z, p.y / p.z];
        Some(self.image_to_pixel(self.distortion.distort(lens)))
    }

    /// Continuous pixel + z-depth → camera-frame point.
    pub fn unproject_pixel(&self, u: f64, v: f64, depth: f64) -> Result<Vec3> {
        let lens = self
            .distortion
            .undistort(self.pixel_to_image(u, v))
            .map_err(|e| Error::Numeric(format!("pixel ({u}, {v}): {e}")))?;
        Ok(Vec3::new(lens[0] * depth, lens[1] * depth, depth))
    }
}

/// Per-pixel z-depth; `None` marks no return within range.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<Option<f64>>,
}

impl DepthImage {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, depth: vec![None; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.depth[v * self.width + u]
    }
}

/// Camera with undistorted lens-plane coordinates precomputed for every pixel center.
#[derive(Clone, Debug)]
pub struct CameraModel {
    spec: CameraSpec,
    /// Row-major lens-plane coordinates.
    lens: Vec<[f64; 2]>,
}

impl CameraModel {
    /// Validates the spec and inverts the distortion at every pixel center. Fails if the
    /// radial map folds over inside the image or any pixel does not invert within tolerance.
    pub fn new(spec: CameraSpec) -> Result<Self> {
        spec.validate()?;
        let corners = [
            (0.0, 0.0),
            ((spec.width - 1) as f64, 0.0),
            (0.0, (spec.height - 1) as f64),
            ((spec.width - 1) as f64, (spec.height - 1) as f64),
        ];
        let mut lens = Vec::with_capacity(spec.width * spec.height);
        for v in 0..spec.height {
            for u in 0..spec.width {
                let img = spec.pixel_to_image(u as f64, v as f64);
                let l = spec.distortion.undistort(img).map_err(|e| Error::Numeric(format!("pixel ({u}, {v}): {e}")))?;
                let back = spec.distortion.distort(l);
                let residual = (back[0] - img[0]).abs().max((back[1] - img[1]).abs());
                if !(residual < LENS_TABLE_TOLERANCE) {
                    return Err(Error::Numeric(format!("pixel ({u}, {v}): inversion residual {residual:e}")));
                }
                lens.push(l);
            }
        }
        let r_max = corners
            .iter()
            .map(|&(u, v)| {
                let l = lens[v as usize * spec.width + u as usize];
                (l[0] * l[0] + l[1] * l[1]).sqrt()
            })
            .fold(0.0, f64::max);
        if !spec.distortion.is_monotone_up_to(r_max) {
            return Err(Error::contract("distortion model is not invertible over the image"));
        }
        Ok(Self { spec, lens })
    }

    pub fn spec(&self) -> &CameraSpec {
        &self.spec
    }

    pub fn lens(&self, u: usize, v: usize) -> [f64; 2] {
        self.lens[v * self.spec.width + u]
    }

    /// Ray-casts through every pixel center; stores z-depth of the nearest hit.
    pub fn render(&self, world: &WorldSnapshot, ego_pose: &RigidTransform) -> DepthImage {
        let cam_to_world = ego_pose.compose(&self.spec.mount);
        let origin = cam_to_world.translation();
        let max_depth = self.spec.max_range;
        let depth: Vec<Option<f64>> = self
            .lens
            .par_chunks(self.spec.width)
            .flat_map_iter(|row| {
                row.iter().map(move |l| {
                    let d = Vec3::new(l[0], l[1], 1.0);
                    let n = d.norm();
                    let ray = Ray::new(origin, cam_to_world.apply_vector(d / n), max_depth * n).ok()?;
                    world.cast_ray(&ray).map(|h| h.distance / n)
                })
            })
            .collect();
        DepthImage { width: self.spec.width, height: self.spec.height, depth }
    }

    /// Vehicle-frame cloud from a depth image, row-major over valid pixels.
    pub fn unproject(&self, image: &DepthImage, timestep: usize) -> Result<PointCloud> {
        if image.width != self.spec.width || image.height != self.spec.height || image.depth.len() != self.lens.len() {
            return Err(Error::contract(format!(
                "depth image is {}x{} but camera is {}x{}",
                image.width, image.height, self.spec.width, self.spec.height
            )));
        }
        let points = image
            .depth
            .iter()
            .zip(&self.lens)
            .filter_map(|(d, l)| d.map(|z| self.spec.mount.apply(Vec3::new(l[0] * z, l[1] * z, z))))
            .collect();
        PointCloud::new(points, Frame::Vehicle, timestep)
    }
}

pub fn render_depth(spec: &CameraSpec, world: &WorldSnapshot, ego_pose: &RigidTransform) -> Result<DepthImage> {
    Ok(CameraModel::new(spec.clone())?.render(world, ego_pose))
}

pub fn unproject_depth(spec: &CameraSpec, image: &DepthImage, timestep: usize) -> Result<PointCloud> {
    CameraModel::new(spec.clone())?.unproject(image, timestep)
}
