use rayon::prelude::*;

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::scene::{Hit, Ray, WorldSnapshot};

/// Rays per parallel work item.
const RAY_CHUNK: usize = 4096;

/// Rotating multi-channel LiDAR. Angles in degrees, sensor frame x forward, y left, z up.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarSpec {
    pub channels: usize,
    pub points_per_channel: usize,
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub max_range: f64,
    /// Sensor → vehicle.
    pub mount: RigidTransform,
}

impl LidarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 1 || self.points_per_channel < 1 {
            return Err(Error::contract("lidar needs at least one channel and one point per channel"));
        }
        if !(self.elevation_min <= self.elevation_max) {
            return Err(Error::contract("lidar elevation_min exceeds elevation_max"));
        }
        if !(self.azimuth_min < self.azimuth_max) {
            return Err(Error::contract("lidar azimuth_min must be below azimuth_max"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::contract("lidar max_range must be positive"));
        }
        Ok(())
    }

    /// Channel elevations in degrees, evenly spaced over `[min, max]` inclusive.
    pub fn elevations(&self) -> Vec<f64> {
        if self.channels == 1 {
            return vec![self.elevation_min];
        }
        let step = (self.elevation_max - self.elevation_min) / (self.channels - 1) as f64;
        (0..self.channels).map(|c| self.elevation_min + step * c as f64).collect()
    }

    /// Azimuths in degrees at the centers of `points_per_channel` bins over `[min, max)`.
    pub fn azimuths(&self) -> Vec<f64> {
        let step = (self.azimuth_max - self.azimuth_min) / self.points_per_channel as f64;
        (0..self.points_per_channel).map(|i| self.azimuth_min + step * (i as f64 + 0.5)).collect()
    }

    /// Unit ray directions in the sensor frame, channel-major.
    pub fn directions(&self) -> Vec<Vec3> {
        let az: Vec<(f64, f64)> = self.azimuths().iter().map(|a| a.to_radians().sin_cos()).collect();
        let mut out = Vec::with_capacity(self.channels * self.points_per_channel);
        for el in self.elevations() {
            let (se, ce) = el.to_radians().sin_cos();
            for &(sa, ca) in &az {
                out.push(Vec3::new(ce * ca, ce * sa, se));
            }
        }
        out
    }

    pub fn ray_count(&self) -> usize {
        self.channels * self.points_per_channel
    }
}

/// A LiDAR with its sensor-frame ray directions precomputed.
#[derive(Clone, Debug)]
pub struct LidarModel {
    spec: LidarSpec,
    directions: Vec<Vec3>,
}

impl LidarModel {
    pub fn new(spec: LidarSpec) -> Result<Self> {
        spec.validate()?;
        let directions = spec.directions();
        Ok(Self { spec, directions })
    }

    pub fn spec(&self) -> &LidarSpec {
        &self.spec
    }

    /// Casts every ray with the sensor at `sensor_to_world`; misses are omitted, order is deterministic.
    pub fn scan_hits(&self, world: &WorldSnapshot, sensor_to_world: &RigidTransform) -> Vec<Hit> {
        cast_all(world, sensor_to_world, &self.directions, self.spec.max_range)
    }

    /// Vehicle-frame cloud of every hit.
    pub fn scan(&self, world: &WorldSnapshot, ego_pose: &RigidTransform) -> PointCloud {
        let sensor_to_world = ego_pose.compose(&self.spec.mount);
        let world_to_vehicle = ego_pose.inverse();
        let points = self.scan_hits(world, &sensor_to_world).iter().map(|h| world_to_vehicle.apply(h.point)).collect();
        PointCloud::new(points, Frame::Vehicle, world.timestep()).expect("hit points are finite")
    }
}

/// One-shot scan; prefer [`LidarModel`] when scanning repeatedly.
pub fn lidar_scan(spec: &LidarSpec, world: &WorldSnapshot, ego_pose: &RigidTransform) -> Result<PointCloud> {
    Ok(LidarModel::new(spec.clone())?.scan(world, ego_pose))
}

pub(crate) fn cast_all(
    world: &WorldSnapshot,
    sensor_to_world: &RigidTransform,
    dirs: &[Vec3],
    max_range: f64,
) -> Vec<Hit> {
    let origin = sensor_to_world.translation();
    let chunks: Vec<Vec<Hit>> = dirs
        .par_chunks(RAY_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .filter_map(|&d| {
                    let ray = Ray::new(origin, sensor_to_world.apply_vector(d), max_range).ok()?;
                    world.cast_ray(&ray)
                })
                .collect()
        })
        .collect();
    chunks.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Actor, Trajectory, TriangleMesh};

    fn ground_world(extent: f64) -> WorldSnapshot {
        let g = TriangleMesh::ground_plane(extent).unwrap();
        WorldSnapshot::build(&[Actor::new("ground", g, Trajectory::Static(RigidTransform::IDENTITY), false)], 0)
            .unwrap()
    }

    fn spec(channels: usize, points: usize, el: (f64, f64), height: f64) -> LidarSpec {
        LidarSpec {
            channels,
            points_per_channel: points,
            elevation_min: el.0,
            elevation_max: el.1,
            azimuth_min: 0.0,
            azimuth_max: 360.0,
            max_range: 1000.0,
            mount: RigidTransform::from_translation(Vec3::new(0.0, 0.0, height)),
        }
    }

    #[test]
    fn horizontal_rays_escape() {
        let cloud = lidar_scan(&spec(1, 4, (0.0, 0.0), 2.0), &ground_world(1e5), &RigidTransform::IDENTITY).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn vertical_ray_hits_below() {
        let cloud =
            lidar_scan(&spec(1, 1, (-90.0, -90.0), 2.0), &ground_world(100.0), &RigidTransform::IDENTITY).unwrap();
        assert_eq!(cloud.len(), 1);
        let p = cloud.points()[0];
        assert!(p.z.abs() < 1e-12 && p.x.abs() < 1e-9 && p.y.abs() < 1e-9, "{p:?}");
        assert_eq!(cloud.frame(), &Frame::Vehicle);
    }

    #[test]
    fn ground_rings() {
        let h = 1.7;
        let s = spec(32, 360, (-31.0, -1.0), h);
        let world = ground_world(1e4);
        let cloud = lidar_scan(&s, &world, &RigidTransform::IDENTITY).unwrap();
        assert_eq!(cloud.len(), s.ray_count());
        for (c, ring) in cloud.points().chunks(360).enumerate() {
            let el = (-31.0 + c as f64 * 30.0 / 31.0_f64).to_radians();
            let expected = h / el.abs().tan();
            for p in ring {
                let radius = (p.x * p.x + p.y * p.y).sqrt();
                assert!((radius - expected).abs() < 1e-6, "channel {c}: {radius} vs {expected}");
            }
        }
    }

    #[test]
    fn channel_layout() {
        let s = spec(5, 4, (-20.0, 20.0), 0.0);
        assert_eq!(s.elevations(), vec![-20.0, -10.0, 0.0, 10.0, 20.0]);
        assert_eq!(s.azimuths(), vec![45.0, 135.0, 225.0, 315.0]);
        assert!(s.directions().iter().all(|d| (d.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(0, 4, (0.0, 0.0), 1.0);
        assert!(s.validate().is_err());
        s.channels = 2;
        s.elevation_min = 5.0;
        assert!(s.validate().is_err());
        s.elevation_min = -5.0;
        s.max_range = 0.0;
        assert!(s.validate().is_err());
    }
}
