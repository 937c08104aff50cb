//! Scenario configuration: a JSON document describing the scene, sensor rigs,
//! reference sensor, grids and regions of interest. Angles are in degrees,
//! lengths in meters, velocities in meters per second.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coverage::{Aggregation, Averaging, GridSpec, Roi, VerticalSlab, DEFAULT_R_THRESH, DEFAULT_TIMESTEPS};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::reference::ReferenceSamplerConfig;
use crate::scene::{Keyframe, Trajectory};
use crate::sensor::{CameraSpec, DistortionModel, LidarSpec};

fn default_timesteps() -> usize {
    DEFAULT_TIMESTEPS
}
fn default_dt() -> f64 {
    0.1
}
fn default_r_thresh() -> f64 {
    DEFAULT_R_THRESH
}
pub fn default_slabs() -> Vec<VerticalSlab> {
    vec![VerticalSlab::ground(), VerticalSlab::obstacles()]
}
pub fn default_grids() -> Vec<GridConfig> {
    vec![
        GridConfig { name: "close".into(), x_min: -20.0, x_max: 20.0, y_min: -10.0, y_max: 10.0, cell_size: 0.2 },
        GridConfig { name: "far".into(), x_min: -40.0, x_max: 160.0, y_min: -40.0, y_max: 40.0, cell_size: 1.0 },
    ]
}
pub fn default_rois() -> Vec<RoiConfig> {
    Roi::presets()
        .into_iter()
        .map(|r| RoiConfig {
            grid: if r.x_max <= 20.0 { "close" } else { "far" }.into(),
            name: r.name,
            slab: r.slab,
            x_min: r.x_min,
            x_max: r.x_max,
            y_min: r.y_min,
            y_max: r.y_max,
        })
        .collect()
}
fn default_azimuth() -> [f64; 2] {
    [0.0, 360.0]
}
fn default_max_range() -> f64 {
    120.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_timesteps")]
    pub timesteps: usize,
    /// Seconds per timestep.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_r_thresh")]
    pub r_thresh: f64,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub aggregation: Aggregation,
    pub scene: SceneConfig,
    pub rigs: Vec<RigConfig>,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default = "default_slabs")]
    pub slabs: Vec<VerticalSlab>,
    #[serde(default = "default_grids")]
    pub grids: Vec<GridConfig>,
    #[serde(default = "default_rois")]
    pub rois: Vec<RoiConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub actors: Vec<ActorConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub id: String,
    #[serde(default)]
    pub ego: bool,
    pub shape: ShapeConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Box {
        center: [f64; 3],
        size: [f64; 3],
    },
    Ground {
        extent: f64,
    },
    Hatchback,
    /// Wavefront OBJ file, relative to the config file.
    Obj {
        path: PathBuf,
    },
}

/// Position plus yaw/pitch/roll in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
}

impl PoseConfig {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        PoseConfig { translation: [x, y, z], ..Default::default() }
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_ypr_degrees(self.yaw, self.pitch, self.roll, v3(self.translation))
    }

    fn validate(&self, field: &str) -> Result<()> {
        let all = [self.translation[0], self.translation[1], self.translation[2], self.yaw, self.pitch, self.roll];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::config(field, "pose values must be finite"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeConfig {
    pub t: usize,
    pub translation: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Static {
        #[serde(default)]
        pose: PoseConfig,
    },
    /// Constant world velocity in m/s from `start`.
    Linear {
        start: PoseConfig,
        velocity: [f64; 3],
    },
    Keyframes {
        keys: Vec<KeyframeConfig>,
    },
    /// One pose per timestep.
    Poses {
        poses: Vec<PoseConfig>,
    },
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig::Static { pose: PoseConfig::default() }
    }
}

impl TrajectoryConfig {
    pub fn to_trajectory(&self, dt: f64) -> Trajectory {
        match self {
            TrajectoryConfig::Static { pose } => Trajectory::Static(pose.to_transform()),
            TrajectoryConfig::Linear { start, velocity } => {
                Trajectory::Linear { start: start.to_transform(), velocity: v3(*velocity) * dt }
            }
            TrajectoryConfig::Keyframes { keys } => Trajectory::Keyframes(
                keys.iter()
                    .map(|k| Keyframe { timestep: k.t, translation: v3(k.translation), yaw: k.yaw.to_radians() })
                    .collect(),
            ),
            TrajectoryConfig::Poses { poses } => {
                Trajectory::Explicit(poses.iter().map(PoseConfig::to_transform).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub name: String,
    pub sensors: Vec<SensorConfig>,
}

/// Frame of externally recorded clouds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordedFrame {
    #[default]
    Vehicle,
    World,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorConfig {
    Lidar {
        name: String,
        channels: usize,
        points_per_channel: usize,
        /// `[min, max]` in degrees.
        elevation: [f64; 2],
        #[serde(default = "default_azimuth")]
        azimuth: [f64; 2],
        #[serde(default = "default_max_range")]
        max_range: f64,
        mount: PoseConfig,
    },
    /// Depth camera. Give either `hfov` or all of `fx`, `fy`, `cx`, `cy`.
    /// The mount rotation turns the optical axis away from vehicle +x.
    Camera {
        name: String,
        width: usize,
        height: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hfov: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fx: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fy: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cx: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cy: Option<f64>,
        #[serde(default)]
        distortion: DistortionModel,
        #[serde(default = "default_max_range")]
        max_range: f64,
        mount: PoseConfig,
    },
    /// Clouds read from files; `{t}` in the path is replaced by the timestep.
    Recorded {
        name: String,
        path: String,
        #[serde(default)]
        frame: RecordedFrame,
    },
}

impl SensorConfig {
    pub fn name(&self) -> &str {
        match self {
            SensorConfig::Lidar { name, .. }
            | SensorConfig::Camera { name, .. }
            | SensorConfig::Recorded { name, .. } => name,
        }
    }

    pub fn lidar_spec(&self) -> Option<LidarSpec> {
        match self {
            SensorConfig::Lidar { channels, points_per_channel, elevation, azimuth, max_range, mount, .. } => {
                Some(LidarSpec {
                    channels: *channels,
                    points_per_channel: *points_per_channel,
                    elevation_min: elevation[0],
                    elevation_max: elevation[1],
                    azimuth_min: azimuth[0],
                    azimuth_max: azimuth[1],
                    max_range: *max_range,
                    mount: mount.to_transform(),
                })
            }
            _ => None,
        }
    }

    pub fn camera_spec(&self) -> Option<Result<CameraSpec>> {
        let SensorConfig::Camera { width, height, hfov, fx, fy, cx, cy, distortion, max_range, mount, .. } = self
        else {
            return None;
        };
        let m = CameraSpec::optical_mount(mount.yaw, mount.pitch, mount.roll, v3(mount.translation));
        let spec = match (hfov, fx, fy, cx, cy) {
            (Some(h), None, None, None, None) => {
                if !(*h > 0.0 && *h < 180.0) {
                    return Some(Err(Error::config("hfov", "must be in (0, 180) degrees")));
                }
                let mut s = CameraSpec::with_horizontal_fov(*width, *height, *h, *max_range, m);
                s.distortion = *distortion;
                s
            }
            (None, Some(fx), Some(fy), Some(cx), Some(cy)) => CameraSpec {
                width: *width,
                height: *height,
                fx: *fx,
                fy: *fy,
                cx: *cx,
                cy: *cy,
                distortion: *distortion,
                max_range: *max_range,
                mount: m,
            },
            _ => return Some(Err(Error::config("intrinsics", "give either hfov or all of fx, fy, cx, cy"))),
        };
        Some(Ok(spec))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    Sampler(ReferenceSamplerConfig),
    /// Pre-recorded reference clouds; `{t}` in the path is replaced by the timestep.
    Recorded {
        path: String,
        #[serde(default)]
        frame: RecordedFrame,
    },
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig::Sampler(ReferenceSamplerConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub name: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
            cell_size: self.cell_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub name: String,
    pub grid: String,
    pub slab: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RoiConfig {
    pub fn roi(&self) -> Roi {
        Roi {
            name: self.name.clone(),
            slab: self.slab.clone(),
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }
}

/// Substitutes the timestep into a recorded-cloud path pattern.
pub fn expand_pattern(pattern: &str, t: usize) -> String {
    pattern.replace("{t}", &t.to_string())
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn check_name(field: &str, name: &str) -> Result<()> {
    if name.is_empty() || name.contains([',', '/', '\\', '\n']) {
        return Err(Error::config(field, format!("invalid name '{name}' (empty or contains , / \\ or newline)")));
    }
    Ok(())
}

fn check_unique<'a>(field: &str, names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::config(field, format!("duplicate name '{n}'")));
        }
    }
    Ok(())
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{p}.{field}"), message),
        Error::Contract(m) | Error::Scenario(m) => Error::config(p, m),
        other => other,
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::parse(
                source_name,
                format!("field '{}', line {} column {}", e.path(), inner.line(), inner.column()),
                inner.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text, &path.display().to_string())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_string(self).expect("config serializes").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_name("name", &self.name)?;
        if self.timesteps == 0 {
            return Err(Error::config("timesteps", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.r_thresh >= 0.0 && self.r_thresh.is_finite()) {
            return Err(Error::config("r_thresh", "must be a non-negative number"));
        }

        let actors = &self.scene.actors;
        check_unique("scene.actors", actors.iter().map(|a| a.id.as_str()))?;
        let egos = actors.iter().filter(|a| a.ego).count();
        if egos != 1 {
            return Err(Error::config("scene.actors", format!("exactly one actor must have ego = true, found {egos}")));
        }
        for (i, a) in actors.iter().enumerate() {
            let p = format!("scene.actors[{i}]");
            match &a.shape {
                ShapeConfig::Box { center, size } => {
                    if !center.iter().all(|v| v.is_finite()) || !size.iter().all(|&s| s > 0.0 && s.is_finite()) {
                        return Err(Error::config(format!("{p}.shape"), "box needs a finite center and positive size"));
                    }
                }
                ShapeConfig::Ground { extent } if !(*extent > 0.0 && extent.is_finite()) => {
                    return Err(Error::config(format!("{p}.shape.extent"), "must be positive"));
                }
                _ => {}
            }
            match &a.trajectory {
                TrajectoryConfig::Static { pose } => pose.validate(&format!("{p}.trajectory.pose"))?,
                TrajectoryConfig::Linear { start, velocity } => {
                    start.validate(&format!("{p}.trajectory.start"))?;
                    if !velocity.iter().all(|v| v.is_finite()) {
                        return Err(Error::config(format!("{p}.trajectory.velocity"), "must be finite"));
                    }
                }
                TrajectoryConfig::Keyframes { keys } => {
                    if keys.is_empty() || keys.windows(2).any(|w| w[0].t >= w[1].t) {
                        return Err(Error::config(
                            format!("{p}.trajectory.keys"),
                            "keyframes must be non-empty with strictly increasing t",
                        ));
                    }
                    if keys[0].t > 0 || keys[keys.len() - 1].t + 1 < self.timesteps {
                        return Err(Error::config(
                            format!("{p}.trajectory.keys"),
                            format!("keyframes must span timesteps 0..{}", self.timesteps - 1),
                        ));
                    }
                }
                TrajectoryConfig::Poses { poses } => {
                    if poses.len() < self.timesteps {
                        return Err(Error::config(
                            format!("{p}.trajectory.poses"),
                            format!("{} poses given for {} timesteps", poses.len(), self.timesteps),
                        ));
                    }
                }
            }
        }

        if self.rigs.is_empty() {
            return Err(Error::config("rigs", "at least one rig is required (it may have no sensors)"));
        }
        check_unique("rigs", self.rigs.iter().map(|r| r.name.as_str()))?;
        for (i, rig) in self.rigs.iter().enumerate() {
            let p = format!("rigs[{i}]");
            check_name(&format!("{p}.name"), &rig.name)?;
            check_unique(&format!("{p}.sensors"), rig.sensors.iter().map(|s| s.name()))?;
            for (j, s) in rig.sensors.iter().enumerate() {
                let sp = format!("{p}.sensors[{j}]");
                if let Some(spec) = s.lidar_spec() {
                    spec.validate().map_err(|e| prefix(e, &sp))?;
                }
                if let Some(spec) = s.camera_spec() {
                    spec.and_then(|c| c.validate()).map_err(|e| prefix(e, &sp))?;
                }
                if let SensorConfig::Lidar { mount, .. } | SensorConfig::Camera { mount, .. } = s {
                    mount.validate(&format!("{sp}.mount"))?;
                }
            }
        }

        if let ReferenceConfig::Sampler(r) = &self.reference {
            r.validate()?;
        }

        check_unique("slabs", self.slabs.iter().map(|s| s.name.as_str()))?;
        for (i, s) in self.slabs.iter().enumerate() {
            check_name(&format!("slabs[{i}].name"), &s.name)?;
            s.validate()?;
        }
        check_unique("grids", self.grids.iter().map(|g| g.name.as_str()))?;
        for (i, g) in self.grids.iter().enumerate() {
            check_name(&format!("grids[{i}].name"), &g.name)?;
            g.spec().validate().map_err(|e| prefix(e, &format!("grids[{i}]")))?;
        }
        check_unique("rois", self.rois.iter().map(|r| r.name.as_str()))?;
        for (i, r) in self.rois.iter().enumerate() {
            let p = format!("rois[{i}]");
            let grid = self
                .grids
                .iter()
                .find(|g| g.name == r.grid)
                .ok_or_else(|| Error::config(format!("{p}.grid"), format!("unknown grid '{}'", r.grid)))?;
            if !self.slabs.iter().any(|s| s.name == r.slab) {
                return Err(Error::config(format!("{p}.slab"), format!("unknown slab '{}'", r.slab)));
            }
            if !(r.x_min < r.x_max && r.y_min < r.y_max) {
                return Err(Error::config(&p, "region extents must be positive"));
            }
            if !r.roi().within(&grid.spec()) {
                return Err(Error::config(&p, format!("region lies outside grid '{}'", r.grid)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "mini",
        "scene": {"actors": [
            {"id": "ego", "ego": true, "shape": {"kind": "hatchback"}},
            {"id": "ground", "shape": {"kind": "ground", "extent": 100}}
        ]},
        "rigs": [{"name": "front", "sensors": [
            {"kind": "lidar", "name": "l", "channels": 16, "points_per_channel": 64,
             "elevation": [-15, 15], "mount": {"translation": [0, 0, 1.8]}}
        ]}]
    }"#;

    #[test]
    fn minimal_defaults() {
        let c = ScenarioConfig::from_json(MINIMAL, "mini.json").unwrap();
        assert_eq!(c.timesteps, 4096);
        assert_eq!(c.r_thresh, 0.4);
        assert_eq!(c.slabs, vec![VerticalSlab::ground(), VerticalSlab::obstacles()]);
        assert_eq!(c.rois.len(), 6);
        assert_eq!(c.reference, ReferenceConfig::Sampler(ReferenceSamplerConfig::default()));
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = ScenarioConfig::from_json(MINIMAL, "mini.json").unwrap();
        let back = ScenarioConfig::from_json(&c.to_json(), "again").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn parse_errors_name_field_and_line() {
        let bad = MINIMAL.replace("\"channels\": 16", "\"channels\": \"many\"");
        let e = ScenarioConfig::from_json(&bad, "mini.json").unwrap_err().to_string();
        // tagged sensor blocks are buffered, so the path stops at the sensor
        assert!(e.contains("rigs[0].sensors[0]") && e.contains("line 10") && e.contains("\"many\""), "{e}");
        let unknown = MINIMAL.replace("\"name\": \"mini\"", "\"name\": \"mini\", \"bogus\": 1");
        assert!(ScenarioConfig::from_json(&unknown, "m").is_err());
    }

    #[test]
    fn semantic_errors_name_field() {
        let bad = MINIMAL.replace("[-15, 15]", "[15, -15]");
        match ScenarioConfig::from_json(&bad, "m") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "rigs[0].sensors[0]"),
            other => panic!("{other:?}"),
        }
        let no_ego = MINIMAL.replace("\"ego\": true, ", "");
        assert!(matches!(ScenarioConfig::from_json(&no_ego, "m"), Err(Error::Config { .. })));
    }

    #[test]
    fn sampler_block_keeps_defaults() {
        let with_ref = MINIMAL.replace(
            "\"rigs\"",
            "\"reference\": {\"kind\": \"sampler\", \"channels\": 256, \"points_per_channel\": 512}, \"rigs\"",
        );
        let c = ScenarioConfig::from_json(&with_ref, "m").unwrap();
        let ReferenceConfig::Sampler(r) = &c.reference else { panic!() };
        assert_eq!((r.channels, r.points_per_channel, r.shell_margin_up), (256, 512, 0.5));
        assert_eq!(ScenarioConfig::from_json(&c.to_json(), "m").unwrap(), c);
    }

    #[test]
    fn camera_intrinsics_choice() {
        let cam = |extra: &str| {
            let s = format!(r#"{{"kind": "camera", "name": "c", "width": 64, "height": 48, {extra} "mount": {{}}}}"#);
            serde_json::from_str::<SensorConfig>(&s).unwrap().camera_spec().unwrap()
        };
        let s = cam(r#""hfov": 90,"#).unwrap();
        assert!((s.fx - 32.0).abs() < 1e-12);
        assert!(cam(r#""hfov": 90, "fx": 10,"#).is_err());
        assert!(cam("").is_err());
        let s = cam(r#""fx": 50, "fy": 60, "cx": 31.5, "cy": 23.5,"#).unwrap();
        assert_eq!((s.fx, s.fy), (50.0, 60.0));
    }

    #[test]
    fn pattern_expansion() {
        assert_eq!(expand_pattern("clouds/ref_{t}.bin", 12), "clouds/ref_12.bin");
    }
}
