//! Vehicle sensors that turn a world snapshot into a vehicle-frame point cloud.

mod camera;
mod distortion;
mod lidar;

pub use camera::{
    camera_to_body, render_depth, unproject_depth, CameraModel, CameraSpec, DepthImage, LENS_TABLE_TOLERANCE,
};
pub use distortion::{DistortionModel, INVERSION_MAX_ITERATIONS, INVERSION_TOLERANCE};
pub use lidar::{lidar_scan, LidarModel, LidarSpec};

pub(crate) use lidar::cast_all;

use crate::cloud::PointCloud;
use crate::error::Result;
use crate::geometry::RigidTransform;
use crate::scene::WorldSnapshot;

/// Either sensor kind, with its per-spec precomputation done once.
#[derive(Clone, Debug)]
pub enum Sensor {
    Lidar(LidarModel),
    Camera(CameraModel),
}

impl Sensor {
    pub fn lidar(spec: LidarSpec) -> Result<Self> {
        Ok(Sensor::Lidar(LidarModel::new(spec)?))
    }

    pub fn camera(spec: CameraSpec) -> Result<Self> {
        Ok(Sensor::Camera(CameraModel::new(spec)?))
    }

    /// Vehicle-frame detections for one timestep.
    pub fn capture(&self, world: &WorldSnapshot, ego_pose: &RigidTransform) -> PointCloud {
        match self {
            Sensor::Lidar(l) => l.scan(world, ego_pose),
            Sensor::Camera(c) => {
                c.unproject(&c.render(world, ego_pose), world.timestep()).expect("rendered image matches its camera")
            }
        }
    }

    pub fn mount(&self) -> &RigidTransform {
        match self {
            Sensor::Lidar(l) => &l.spec().mount,
            Sensor::Camera(c) => &c.spec().mount,
        }
    }
}
