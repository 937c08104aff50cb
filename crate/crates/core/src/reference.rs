//! Monte Carlo reference sensor.
//!
//! Each timestep a dense LiDAR is placed at a random pose in a shell around the
//! ego bounding box. Its hits on non-ego geometry are the probes at which sensor
//! coverage is evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, RigidTransform, Vec3};
use crate::scene::WorldSnapshot;
use crate::sensor::{cast_all, LidarSpec};

fn default_margin() -> f64 {
    0.5
}
fn default_resolution() -> usize {
    1024
}
fn default_elevation() -> [f64; 2] {
    [-90.0, 0.0]
}
fn default_azimuth_span() -> f64 {
    360.0
}
fn default_yaw() -> [f64; 2] {
    [-180.0, 180.0]
}
fn default_tilt() -> [f64; 2] {
    [-45.0, 45.0]
}
fn default_max_range() -> f64 {
    200.0
}
fn default_sensor_count() -> usize {
    1
}

/// Reference sensor placement and resolution. Angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSamplerConfig {
    #[serde(default = "default_margin")]
    pub shell_margin_up: f64,
    #[serde(default = "default_margin")]
    pub shell_margin_horizontal: f64,
    #[serde(default = "default_resolution")]
    pub channels: usize,
    #[serde(default = "default_resolution")]
    pub points_per_channel: usize,
    #[serde(default = "default_elevation")]
    pub elevation: [f64; 2],
    #[serde(default = "default_azimuth_span")]
    pub azimuth_span: f64,
    #[serde(default = "default_yaw")]
    pub yaw_range: [f64; 2],
    #[serde(default = "default_tilt")]
    pub pitch_range: [f64; 2],
    #[serde(default = "default_tilt")]
    pub roll_range: [f64; 2],
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    /// Reference sensors fused per timestep.
    #[serde(default = "default_sensor_count")]
    pub sensors_per_timestep: usize,
    /// Taken from the scenario seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ReferenceSamplerConfig {
    fn default() -> Self {
        Self {
            shell_margin_up: default_margin(),
            shell_margin_horizontal: default_margin(),
            channels: default_resolution(),
            points_per_channel: default_resolution(),
            elevation: default_elevation(),
            azimuth_span: default_azimuth_span(),
            yaw_range: default_yaw(),
            pitch_range: default_tilt(),
            roll_range: default_tilt(),
            max_range: default_max_range(),
            sensors_per_timestep: default_sensor_count(),
            seed: 0,
        }
    }
}

impl ReferenceSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: &str| Err(Error::config(format!("reference.{name}"), msg));
        if !(self.shell_margin_up > 0.0) {
            return field("shell_margin_up", "must be positive");
        }
        if !(self.shell_margin_horizontal > 0.0) {
            return field("shell_margin_horizontal", "must be positive");
        }
        if self.channels == 0 || self.points_per_channel == 0 {
            return field("channels", "resolution must be at least 1x1");
        }
        for (name, r) in [
            ("elevation", self.elevation),
            ("yaw_range", self.yaw_range),
            ("pitch_range", self.pitch_range),
            ("roll_range", self.roll_range),
        ] {
            if !(r[0] <= r[1]) {
                return field(name, "range must be ordered [min, max]");
            }
        }
        if !(self.azimuth_span > 0.0 && self.azimuth_span <= 360.0) {
            return field("azimuth_span", "must be in (0, 360]");
        }
        if !(self.max_range > 0.0) {
            return field("max_range", "must be positive");
        }
        if self.sensors_per_timestep == 0 {
            return field("sensors_per_timestep", "must be at least 1");
        }
        Ok(())
    }

    pub fn lidar_spec(&self, mount: RigidTransform) -> LidarSpec {
        LidarSpec {
            channels: self.channels,
            points_per_channel: self.points_per_channel,
            elevation_min: self.elevation[0],
            elevation_max: self.elevation[1],
            azimuth_min: 0.0,
            azimuth_max: self.azimuth_span,
            max_range: self.max_range,
            mount,
        }
    }
}

/// Ego box grown by the margins upward and sideways, minus the ego box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellVolume {
    pub outer: Aabb,
    pub inner: Aabb,
}

impl ShellVolume {
    pub fn new(ego_box: Aabb, shell_margin_up: f64, shell_margin_horizontal: f64) -> Self {
        let outer = Aabb {
            min: Vec3::new(
                ego_box.min.x - shell_margin_horizontal,
                ego_box.min.y - shell_margin_horizontal,
                ego_box.min.z,
            ),
            max: Vec3::new(
                ego_box.max.x + shell_margin_horizontal,
                ego_box.max.y + shell_margin_horizontal,
                ego_box.max.z + shell_margin_up,
            ),
        };
        Self { outer, inner: ego_box }
    }

    pub fn volume(&self) -> f64 {
        self.outer.volume() - self.inner.volume()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.outer.contains(p) && !self.inner.contains(p)
    }

    /// Rejection sampling from the outer box.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        loop {
            let p = Vec3::new(
                uniform(rng, self.outer.min.x, self.outer.max.x),
                uniform(rng, self.outer.min.y, self.outer.max.y),
                uniform(rng, self.outer.min.z, self.outer.max.z),
            );
            if !self.inner.contains(p) {
                return p;
            }
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Random stream for timestep `t`: the seeded ChaCha generator on stream `t`,
/// so every timestep is independent of evaluation order.
pub fn timestep_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Dense LiDAR re-posed every timestep.
#[derive(Clone, Debug)]
pub struct ReferenceSampler {
    config: ReferenceSamplerConfig,
    shell: ShellVolume,
    directions: Vec<Vec3>,
}

impl ReferenceSampler {
    pub fn new(config: ReferenceSamplerConfig, ego_box: Aabb) -> Result<Self> {
        config.validate()?;
        let shell = ShellVolume::new(ego_box, config.shell_margin_up, config.shell_margin_horizontal);
        let directions = config.lidar_spec(RigidTransform::IDENTITY).directions();
        Ok(Self { config, shell, directions })
    }

    pub fn config(&self) -> &ReferenceSamplerConfig {
        &self.config
    }

    pub fn shell(&self) -> &ShellVolume {
        &self.shell
    }

    /// Reference → vehicle poses for timestep `t`, one per fused reference sensor.
    pub fn poses(&self, t: usize) -> Vec<RigidTransform> {
        let mut rng = timestep_rng(self.config.seed, t);
        (0..self.config.sensors_per_timestep).map(|_| draw_pose(&self.config, &self.shell, &mut rng)).collect()
    }

    /// Vehicle-frame reference cloud with ego hits removed.
    pub fn scan(&self, world: &WorldSnapshot, ego_pose: &RigidTransform) -> PointCloud {
        let world_to_vehicle = ego_pose.inverse();
        let mut points = Vec::new();
        for mount in self.poses(world.timestep()) {
            let sensor_to_world = ego_pose.compose(&mount);
            let hits = cast_all(world, &sensor_to_world, &self.directions, self.config.max_range);
            points.extend(hits.iter().filter(|h| !world.is_ego(h.actor)).map(|h| world_to_vehicle.apply(h.point)));
        }
        PointCloud::new(points, Frame::Vehicle, world.timestep()).expect("hit points are finite")
    }
}

/// Convenience wrapper around [`ReferenceSampler::poses`] for a single sensor.
pub fn sample_reference_pose(cfg: &ReferenceSamplerConfig, ego_box: Aabb, t: usize) -> Result<RigidTransform> {
    cfg.validate()?;
    let shell = ShellVolume::new(ego_box, cfg.shell_margin_up, cfg.shell_margin_horizontal);
    Ok(draw_pose(cfg, &shell, &mut timestep_rng(cfg.seed, t)))
}

fn draw_pose(cfg: &ReferenceSamplerConfig, shell: &ShellVolume, rng: &mut impl Rng) -> RigidTransform {
    let position = shell.sample(rng);
    let yaw = uniform(rng, cfg.yaw_range[0], cfg.yaw_range[1]);
    let pitch = uniform(rng, cfg.pitch_range[0], cfg.pitch_range[1]);
    let roll = uniform(rng, cfg.roll_range[0], cfg.roll_range[1]);
    RigidTransform::from_ypr_degrees(yaw, pitch, roll, position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mat3;

    fn ego_box() -> Aabb {
        Aabb::new(Vec3::new(-2.25, -0.95, 0.15), Vec3::new(2.25, 0.95, 1.65)).unwrap()
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = ReferenceSamplerConfig::default();
        assert_eq!((c.shell_margin_up, c.shell_margin_horizontal), (0.5, 0.5));
        assert_eq!((c.channels, c.points_per_channel), (1024, 1024));
        assert_eq!(c.elevation, [-90.0, 0.0]);
        assert_eq!(c.azimuth_span, 360.0);
        assert_eq!(c.yaw_range, [-180.0, 180.0]);
        assert_eq!(c.pitch_range, [-45.0, 45.0]);
        assert_eq!(c.roll_range, [-45.0, 45.0]);
        let parsed: ReferenceSamplerConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn samples_stay_in_shell() {
        let cfg = ReferenceSamplerConfig::default();
        let shell = ShellVolume::new(ego_box(), 0.5, 0.5);
        for t in 0..10_000 {
            let p = sample_reference_pose(&cfg, ego_box(), t).unwrap().translation();
            assert!(shell.outer.contains(p));
            assert!(!shell.inner.contains(p));
        }
    }

    #[test]
    fn zero_angle_ranges_give_identity_rotation() {
        let cfg = ReferenceSamplerConfig {
            yaw_range: [0.0, 0.0],
            pitch_range: [0.0, 0.0],
            roll_range: [0.0, 0.0],
            ..Default::default()
        };
        let pose = sample_reference_pose(&cfg, ego_box(), 3).unwrap();
        assert_eq!(*pose.rotation(), Mat3::IDENTITY);
    }

    #[test]
    fn deterministic_per_timestep() {
        let cfg = ReferenceSamplerConfig { seed: 42, ..Default::default() };
        let a: Vec<_> = (0..50).map(|t| sample_reference_pose(&cfg, ego_box(), t).unwrap()).collect();
        let b: Vec<_> = (0..50).rev().map(|t| sample_reference_pose(&cfg, ego_box(), t).unwrap()).collect();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x, y);
        }
        assert_ne!(a[0], a[1]);
        let other = ReferenceSamplerConfig { seed: 43, ..Default::default() };
        assert_ne!(sample_reference_pose(&other, ego_box(), 0).unwrap(), a[0]);
    }

    #[test]
    fn validation() {
        let mut c = ReferenceSamplerConfig::default();
        assert!(c.validate().is_ok());
        c.shell_margin_up = 0.0;
        assert!(c.validate().is_err());
        c.shell_margin_up = 0.5;
        c.pitch_range = [10.0, -10.0];
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ReferenceSamplerConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn shell_volume() {
        let s = ShellVolume::new(ego_box(), 0.5, 0.5);
        let expected = 5.5 * 2.9 * 2.0 - 4.5 * 1.9 * 1.5;
        assert!((s.volume() - expected).abs() < 1e-12);
        assert_eq!(s.outer.min.z, s.inner.min.z);
    }
}
