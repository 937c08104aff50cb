//! Bundled scenarios. The road scene is a desk-scale approximation of urban
//! car-following: a straight two-lane road, a lead van at a varying gap,
//! oncoming traffic, parked vans and building rows on both sides. Traffic is van
//! height, so vehicle roofs sit above the obstacle slab.

use crate::config::{
    default_grids, default_rois, default_slabs, ActorConfig, KeyframeConfig, PoseConfig, ReferenceConfig, RigConfig,
    ScenarioConfig, SceneConfig, SensorConfig, ShapeConfig, TrajectoryConfig,
};
use crate::coverage::{Aggregation, Averaging, DEFAULT_R_THRESH};
use crate::reference::ReferenceSamplerConfig;

pub const PRESET_NAMES: [&str; 3] = ["camera-trio", "roof-vs-grille", "lidar-resolution"];

/// Timesteps used by the bundled presets.
pub const PRESET_TIMESTEPS: usize = 256;
/// Ego speed in m/s.
pub const EGO_SPEED: f64 = 10.0;
pub const GRILLE_MOUNT: [f64; 3] = [2.3, 0.0, 0.5];
pub const ROOF_MOUNT: [f64; 3] = [-0.5, 0.0, 1.9];
/// Elevation field of view of the preset LiDARs, degrees.
pub const LIDAR_ELEVATION: [f64; 2] = [-25.0, 15.0];
pub const LIDAR_POINTS_PER_CHANNEL: usize = 512;
pub const LIDAR_RANGE: f64 = 120.0;

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "camera-trio" => Some(camera_trio()),
        "roof-vs-grille" => Some(roof_vs_grille()),
        "lidar-resolution" => Some(lidar_resolution()),
        _ => None,
    }
}

/// Reference sensor used by the presets: the default sampler at 256×512.
pub fn desk_reference() -> ReferenceSamplerConfig {
    ReferenceSamplerConfig { channels: 256, points_per_channel: 512, ..Default::default() }
}

fn actor(id: String, shape: ShapeConfig, trajectory: TrajectoryConfig) -> ActorConfig {
    ActorConfig { id, ego: false, shape, trajectory }
}

fn fixed(x: f64, y: f64) -> TrajectoryConfig {
    TrajectoryConfig::Static { pose: PoseConfig::at(x, y, 0.0) }
}

fn van() -> ShapeConfig {
    ShapeConfig::Box { center: [0.0, 0.0, 1.05], size: [4.8, 1.9, 2.1] }
}

/// Straight road scene for `timesteps` steps of `dt` seconds.
pub fn road_scene(timesteps: usize, dt: f64) -> SceneConfig {
    let travel = EGO_SPEED * dt * timesteps as f64;
    let end = travel + 200.0;
    let mut actors = vec![
        ActorConfig {
            id: "ego".into(),
            ego: true,
            shape: ShapeConfig::Hatchback,
            trajectory: TrajectoryConfig::Linear { start: PoseConfig::default(), velocity: [EGO_SPEED, 0.0, 0.0] },
        },
        actor("ground".into(), ShapeConfig::Ground { extent: end + 100.0 }, TrajectoryConfig::default()),
    ];

    // lead vehicle: gap to the ego cycles through these values every 32 steps
    let gaps = [14.0, 22.0, 11.0, 28.0, 17.0, 24.0];
    let step = EGO_SPEED * dt;
    let mut keys = Vec::new();
    let mut t = 0;
    let mut k = 0;
    loop {
        keys.push(KeyframeConfig { t, translation: [t as f64 * step + gaps[k % gaps.len()], 0.0, 0.0], yaw: 0.0 });
        if t + 1 >= timesteps {
            break;
        }
        t = (t + 32).min(timesteps - 1);
        k += 1;
    }
    actors.push(actor("lead".into(), van(), TrajectoryConfig::Keyframes { keys }));

    // oncoming traffic in the left lane
    for (i, x0) in [60.0, 150.0, 260.0].into_iter().enumerate() {
        actors.push(actor(
            format!("oncoming-{i}"),
            van(),
            TrajectoryConfig::Linear { start: PoseConfig::at(x0, 3.5, 0.0), velocity: [-8.0, 0.0, 0.0] },
        ));
    }

    // parked vans, staggered on both sides
    let mut x = 9.0;
    let mut i = 0;
    while x < end {
        let y = if i % 2 == 0 { -3.6 } else { 6.8 };
        actors.push(actor(format!("parked-{i}"), van(), fixed(x, y)));
        x += 13.0 + 5.0 * ((i * 7) % 3) as f64;
        i += 1;
    }

    // building rows with gaps at cross streets
    for (side, y) in [("right", -11.0), ("left", 13.0)] {
        let mut x = -30.0;
        let mut j = 0;
        while x < end {
            let len = 18.0 + 6.0 * (j % 3) as f64;
            actors.push(actor(
                format!("building-{side}-{j}"),
                ShapeConfig::Box { center: [x + len / 2.0, y, 6.0], size: [len, 8.0, 12.0] },
                TrajectoryConfig::default(),
            ));
            x += len + if j % 4 == 3 { 12.0 } else { 3.0 };
            j += 1;
        }
    }
    SceneConfig { actors }
}

pub fn lidar(name: &str, channels: usize, mount: [f64; 3]) -> SensorConfig {
    SensorConfig::Lidar {
        name: name.into(),
        channels,
        points_per_channel: LIDAR_POINTS_PER_CHANNEL,
        elevation: LIDAR_ELEVATION,
        azimuth: [0.0, 360.0],
        max_range: LIDAR_RANGE,
        mount: PoseConfig::at(mount[0], mount[1], mount[2]),
    }
}

fn base(name: &str, description: &str, rigs: Vec<RigConfig>) -> ScenarioConfig {
    let dt = 0.1;
    ScenarioConfig {
        name: name.into(),
        description: description.into(),
        seed: 1,
        timesteps: PRESET_TIMESTEPS,
        dt,
        r_thresh: DEFAULT_R_THRESH,
        averaging: Averaging::Pooled,
        aggregation: Aggregation::Mean,
        scene: road_scene(PRESET_TIMESTEPS, dt),
        rigs,
        reference: ReferenceConfig::Sampler(desk_reference()),
        slabs: default_slabs(),
        grids: default_grids(),
        rois: default_rois(),
    }
}

/// One front camera behind the windscreen and two side-mirror cameras facing rearward.
pub fn camera_trio() -> ScenarioConfig {
    let cam = |name: &str, t: [f64; 3], yaw: f64, pitch: f64| SensorConfig::Camera {
        name: name.into(),
        width: 320,
        height: 240,
        hfov: Some(90.0),
        fx: None,
        fy: None,
        cx: None,
        cy: None,
        distortion: Default::default(),
        max_range: 80.0,
        mount: PoseConfig { translation: t, yaw, pitch, roll: 0.0 },
    };
    base(
        "camera-trio",
        "front camera plus two side-mirror cameras, 90 degree horizontal field of view",
        vec![RigConfig {
            name: "camera-trio".into(),
            sensors: vec![
                cam("front", [0.5, 0.0, 1.55], 0.0, 10.0),
                cam("mirror-left", [0.45, 1.0, 1.05], 135.0, 10.0),
                cam("mirror-right", [0.45, -1.0, 1.05], -135.0, 10.0),
            ],
        }],
    )
}

/// Identical 128-channel LiDARs at the front grille and on the roof.
pub fn roof_vs_grille() -> ScenarioConfig {
    base(
        "roof-vs-grille",
        "128-channel LiDAR mounted at the front grille versus the middle of the roof",
        vec![
            RigConfig { name: "grille".into(), sensors: vec![lidar("grille", 128, GRILLE_MOUNT)] },
            RigConfig { name: "roof".into(), sensors: vec![lidar("roof", 128, ROOF_MOUNT)] },
        ],
    )
}

/// The roof LiDAR at 32, 64 and 128 channels with an unchanged field of view.
pub fn lidar_resolution() -> ScenarioConfig {
    base(
        "lidar-resolution",
        "roof LiDAR with 32, 64 and 128 channels over the same elevation range",
        [32, 64, 128]
            .into_iter()
            .map(|c| RigConfig { name: format!("roof-{c}"), sensors: vec![lidar("roof", c, ROOF_MOUNT)] })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(ScenarioConfig::from_json(&c.to_json(), name).unwrap(), c);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn lead_keyframes_span_run() {
        let s = road_scene(100, 0.1);
        let lead = s.actors.iter().find(|a| a.id == "lead").unwrap();
        let TrajectoryConfig::Keyframes { keys } = &lead.trajectory else { panic!() };
        assert_eq!(keys.first().unwrap().t, 0);
        assert_eq!(keys.last().unwrap().t, 99);
    }
}
