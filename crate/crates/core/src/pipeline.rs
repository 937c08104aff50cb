//! Scenario execution: per timestep, build the world, capture every rig, scan with
//! the reference sensor, compute blind-spot radii and accumulate coverage grids.
//!
//! Timesteps are evaluated in parallel batches and accumulated strictly in timestep
//! order, so results do not depend on the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cloud::{Frame, FrameTransform, PointCloud};
use crate::config::{expand_pattern, RecordedFrame, ReferenceConfig, ScenarioConfig, SensorConfig, ShapeConfig};
use crate::coverage::{radii_from_index, summarize, CoverageGrid, GridSpec, VerticalSlab};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, RigidTransform, Vec3};
use crate::io::{emit_raster, ingest_cloud, ClampCount, CoverageReport, RunMetadata};
use crate::kdtree::KdTree;
use crate::reference::{ReferenceSampler, ReferenceSamplerConfig};
use crate::scene::{Actor, TriangleMesh, WorldSnapshot};
use crate::sensor::Sensor;

#[derive(Clone, Debug)]
enum RigSensor {
    Simulated(Sensor),
    Recorded { path: PathBuf, frame: RecordedFrame },
}

#[derive(Clone, Debug)]
struct Rig {
    name: String,
    sensors: Vec<RigSensor>,
}

#[derive(Clone, Debug)]
enum ReferenceSource {
    Sampler(ReferenceSampler),
    Recorded { path: PathBuf, frame: RecordedFrame },
}

/// One grid on one slab.
#[derive(Clone, Debug)]
pub struct Layer {
    pub grid: String,
    pub spec: GridSpec,
    pub slab: VerticalSlab,
}

/// A validated scenario with meshes loaded and sensors precomputed.
#[derive(Clone, Debug)]
pub struct Scenario {
    config: ScenarioConfig,
    actors: Vec<Actor>,
    ego: usize,
    ego_box: Aabb,
    rigs: Vec<Rig>,
    reference: ReferenceSource,
    layers: Vec<Layer>,
}

/// Probes of one timestep, shared by all rigs.
#[derive(Clone, Debug)]
pub struct TimestepProbes {
    pub timestep: usize,
    /// Size of the full reference cloud.
    pub reference_points: usize,
    /// Reference points that fall in at least one layer.
    pub queries: Vec<Vec3>,
    /// Per layer: `(query index, cell index)` pairs in query order.
    pub cells: Vec<Vec<(u32, u32)>>,
    /// Per rig: blind-spot radius of every query.
    pub radii: Vec<Vec<f64>>,
    /// Per rig: fused sensor cloud size.
    pub sensor_points: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RigResult {
    pub name: String,
    pub sensor_count: usize,
    /// Same order as [`Scenario::layers`].
    pub grids: Vec<CoverageGrid>,
    pub empty_cloud_timesteps: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub timesteps: usize,
    pub reference_points: u64,
    pub rigs: Vec<RigResult>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Scenario {
    /// Relative file references resolve against `base_dir`.
    pub fn new(config: ScenarioConfig, base_dir: &Path) -> Result<Self> {
        config.validate()?;
        let mut actors = Vec::with_capacity(config.scene.actors.len());
        for a in &config.scene.actors {
            let mesh = match &a.shape {
                ShapeConfig::Box { center, size } => TriangleMesh::cuboid(
                    Vec3::new(center[0], center[1], center[2]),
                    Vec3::new(size[0], size[1], size[2]),
                )?,
                ShapeConfig::Ground { extent } => TriangleMesh::ground_plane(*extent)?,
                ShapeConfig::Hatchback => TriangleMesh::hatchback(),
                ShapeConfig::Obj { path } => TriangleMesh::load_obj(&resolve(base_dir, path))?,
            };
            actors.push(Actor::new(a.id.clone(), mesh, a.trajectory.to_trajectory(config.dt), a.ego));
        }
        let ego = actors.iter().position(|a| a.is_ego).expect("validated: one ego");
        let ego_box = actors[ego].mesh.bounds();
        if ego_box.is_empty() {
            return Err(Error::config(format!("scene.actors[{ego}]"), "ego mesh is empty"));
        }

        let mut rigs = Vec::with_capacity(config.rigs.len());
        for (i, rc) in config.rigs.iter().enumerate() {
            let mut sensors = Vec::with_capacity(rc.sensors.len());
            for (j, s) in rc.sensors.iter().enumerate() {
                let field = |e: Error| Error::config(format!("rigs[{i}].sensors[{j}]"), e.to_string());
                sensors.push(match s {
                    SensorConfig::Lidar { .. } => {
                        RigSensor::Simulated(Sensor::lidar(s.lidar_spec().expect("lidar")).map_err(field)?)
                    }
                    SensorConfig::Camera { .. } => {
                        let spec = s.camera_spec().expect("camera").map_err(field)?;
                        RigSensor::Simulated(Sensor::camera(spec).map_err(field)?)
                    }
                    SensorConfig::Recorded { path, frame, .. } => {
                        RigSensor::Recorded { path: resolve(base_dir, Path::new(path)), frame: *frame }
                    }
                });
            }
            rigs.push(Rig { name: rc.name.clone(), sensors });
        }

        let reference = match &config.reference {
            ReferenceConfig::Sampler(r) => {
                let cfg = ReferenceSamplerConfig { seed: config.seed, ..r.clone() };
                ReferenceSource::Sampler(ReferenceSampler::new(cfg, ego_box)?)
            }
            ReferenceConfig::Recorded { path, frame } => {
                ReferenceSource::Recorded { path: resolve(base_dir, Path::new(path)), frame: *frame }
            }
        };

        let mut layers = Vec::new();
        for g in &config.grids {
            for s in &config.slabs {
                layers.push(Layer { grid: g.name.clone(), spec: g.spec(), slab: s.clone() });
            }
        }
        Ok(Scenario { config, actors, ego, ego_box, rigs, reference, layers })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (config, base) = ScenarioConfig::load(path)?;
        Scenario::new(config, &base)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn ego_box(&self) -> Aabb {
        self.ego_box
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn rig_names(&self) -> Vec<&str> {
        self.rigs.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn layer_index(&self, grid: &str, slab: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.grid == grid && l.slab.name == slab)
    }

    pub fn world(&self, t: usize) -> Result<WorldSnapshot> {
        WorldSnapshot::build(&self.actors, t)
    }

    /// Ego local → world; the ego local frame is the vehicle frame.
    pub fn ego_pose(&self, t: usize) -> Result<RigidTransform> {
        self.actors[self.ego].pose_at(t)
    }

    fn recorded(&self, path: &Path, frame: RecordedFrame, ego_pose: &RigidTransform, t: usize) -> Result<PointCloud> {
        let file = PathBuf::from(expand_pattern(&path.to_string_lossy(), t));
        match frame {
            RecordedFrame::Vehicle => ingest_cloud(&file, Frame::Vehicle, t),
            RecordedFrame::World => {
                let to_vehicle = FrameTransform::new(Frame::World, Frame::Vehicle, ego_pose.inverse());
                ingest_cloud(&file, Frame::World, t)?.transformed(&to_vehicle)
            }
        }
    }

    pub fn reference_cloud(&self, world: &WorldSnapshot, ego_pose: &RigidTransform) -> Result<PointCloud> {
        match &self.reference {
            ReferenceSource::Sampler(s) => Ok(s.scan(world, ego_pose)),
            ReferenceSource::Recorded { path, frame } => self.recorded(path, *frame, ego_pose, world.timestep()),
        }
    }

    /// Fused vehicle-frame cloud of every sensor in rig `rig`.
    pub fn sensor_cloud(&self, rig: usize, world: &WorldSnapshot, ego_pose: &RigidTransform) -> Result<PointCloud> {
        let t = world.timestep();
        let clouds = self.rigs[rig]
            .sensors
            .iter()
            .map(|s| match s {
                RigSensor::Simulated(s) => Ok(s.capture(world, ego_pose)),
                RigSensor::Recorded { path, frame } => self.recorded(path, *frame, ego_pose, t),
            })
            .collect::<Result<Vec<_>>>()?;
        PointCloud::fuse(&clouds, Frame::Vehicle, t)
    }

    pub fn evaluate(&self, t: usize) -> Result<TimestepProbes> {
        let world = self.world(t)?;
        let ego_pose = self.ego_pose(t)?;
        let reference = self.reference_cloud(&world, &ego_pose)?;

        let mut queries = Vec::new();
        let mut cells: Vec<Vec<(u32, u32)>> = vec![Vec::new(); self.layers.len()];
        for &p in reference.points() {
            let q = queries.len() as u32;
            let mut used = false;
            for (l, layer) in self.layers.iter().enumerate() {
                if !layer.slab.contains(p.z) {
                    continue;
                }
                if let Some(c) = layer.spec.cell_of(p.x, p.y) {
                    cells[l].push((q, c as u32));
                    used = true;
                }
            }
            if used {
                queries.push(p);
            }
        }

        let mut radii = Vec::with_capacity(self.rigs.len());
        let mut sensor_points = Vec::with_capacity(self.rigs.len());
        for r in 0..self.rigs.len() {
            let cloud = self.sensor_cloud(r, &world, &ego_pose)?;
            sensor_points.push(cloud.len());
            let tree = KdTree::build(cloud.points());
            radii.push(radii_from_index(&tree, &queries).into_iter().map(|p| p.radius).collect());
        }
        Ok(TimestepProbes { timestep: t, reference_points: reference.len(), queries, cells, radii, sensor_points })
    }

    pub fn run(&self) -> Result<RunResult> {
        self.run_with_progress(|_| {})
    }

    /// Runs every timestep; `progress` receives the number of completed timesteps.
    pub fn run_with_progress(&self, mut progress: impl FnMut(usize)) -> Result<RunResult> {
        let mut rigs: Vec<RigResult> = self
            .rigs
            .iter()
            .map(|r| {
                Ok(RigResult {
                    name: r.name.clone(),
                    sensor_count: r.sensors.len(),
                    grids: self
                        .layers
                        .iter()
                        .map(|l| CoverageGrid::new(l.spec.clone(), l.slab.clone()))
                        .collect::<Result<_>>()?,
                    empty_cloud_timesteps: 0,
                })
            })
            .collect::<Result<_>>()?;
        let total = self.config.timesteps;
        let batch = (2 * rayon::current_num_threads()).max(1);
        let mut reference_points = 0u64;
        let mut done = 0;
        let mut scratch_cells = Vec::new();
        let mut scratch_radii = Vec::new();
        for start in (0..total).step_by(batch) {
            let end = (start + batch).min(total);
            let probes: Vec<TimestepProbes> =
                (start..end).into_par_iter().map(|t| self.evaluate(t)).collect::<Result<_>>()?;
            for p in &probes {
                reference_points += p.reference_points as u64;
                for (r, rig) in rigs.iter_mut().enumerate() {
                    if p.sensor_points[r] == 0 {
                        rig.empty_cloud_timesteps += 1;
                    }
                    for (l, grid) in rig.grids.iter_mut().enumerate() {
                        scratch_cells.clear();
                        scratch_radii.clear();
                        for &(q, c) in &p.cells[l] {
                            scratch_cells.push(c as usize);
                            scratch_radii.push(p.radii[r][q as usize]);
                        }
                        grid.accumulate_located(&scratch_cells, &scratch_radii, self.config.r_thresh);
                    }
                }
            }
            done = end;
            progress(done);
        }
        debug_assert_eq!(done, total);
        Ok(RunResult { timesteps: total, reference_points, rigs })
    }

    fn reference_description(&self) -> String {
        match &self.reference {
            ReferenceSource::Sampler(s) => {
                let c = s.config();
                let d = ReferenceSamplerConfig::default();
                let mut out = format!(
                    "sampler {}x{} (channels x points per channel), {} per timestep",
                    c.channels, c.points_per_channel, c.sensors_per_timestep
                );
                if (c.channels, c.points_per_channel) != (d.channels, d.points_per_channel) {
                    out += &format!("; reduced from the default {}x{}", d.channels, d.points_per_channel);
                }
                out
            }
            ReferenceSource::Recorded { path, .. } => format!("recorded clouds {}", path.display()),
        }
    }

    pub fn metadata(&self, rig: &RigResult) -> RunMetadata {
        let mut notes = Vec::new();
        if rig.sensor_count == 0 {
            notes.push("empty sensor rig: every radius is clamped to the grid diagonal".to_string());
        } else if rig.empty_cloud_timesteps > 0 {
            notes.push(format!("{} timesteps without any sensor detection", rig.empty_cloud_timesteps));
        }
        if self.config.timesteps < crate::coverage::DEFAULT_TIMESTEPS {
            notes.push(format!(
                "desk-scale run: {} timesteps instead of the default {}",
                self.config.timesteps,
                crate::coverage::DEFAULT_TIMESTEPS
            ));
        }
        RunMetadata {
            seed: self.config.seed,
            timesteps: self.config.timesteps,
            config_sha256: self.config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            r_thresh: self.config.r_thresh,
            averaging: format!("{:?}", self.config.averaging).to_lowercase(),
            aggregation: format!("{:?}", self.config.aggregation).to_lowercase(),
            reference: self.reference_description(),
            sensor_count: rig.sensor_count,
            clamped: self
                .layers
                .iter()
                .zip(&rig.grids)
                .map(|(l, g)| ClampCount {
                    grid: l.grid.clone(),
                    slab: l.slab.name.clone(),
                    clamped: g.clamped_count(),
                    probes: g.total_probes(),
                })
                .collect(),
            notes,
        }
    }

    /// Region summaries for every rig, without writing files.
    pub fn reports(&self, result: &RunResult) -> Result<Vec<CoverageReport>> {
        result.rigs.iter().map(|rig| self.report(rig, Vec::new())).collect()
    }

    fn report(&self, rig: &RigResult, rasters: Vec<String>) -> Result<CoverageReport> {
        let finalized: Vec<_> =
            rig.grids.iter().map(|g| g.finalize_with(self.config.averaging, self.config.aggregation)).collect();
        let summaries = self
            .config
            .rois
            .iter()
            .map(|r| {
                let l = self.layer_index(&r.grid, &r.slab).expect("validated region");
                summarize(&finalized[l], &r.roi())
            })
            .collect::<Result<_>>()?;
        Ok(CoverageReport {
            scenario: self.config.name.clone(),
            rig: rig.name.clone(),
            metadata: self.metadata(rig),
            summaries,
            rasters,
        })
    }

    /// Writes rasters and `report.json` to `<out_dir>/<scenario>/<rig>/` for every rig.
    pub fn emit(&self, result: &RunResult, out_dir: &Path) -> Result<Vec<(PathBuf, CoverageReport)>> {
        let mut out = Vec::new();
        for rig in &result.rigs {
            let dir = out_dir.join(&self.config.name).join(&rig.name);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let meta = self.metadata(rig).pairs(&self.config.name, &rig.name);
            let mut files = Vec::new();
            for (layer, grid) in self.layers.iter().zip(&rig.grids) {
                let f = grid.finalize_with(self.config.averaging, self.config.aggregation);
                for raster in [&f.radius, &f.probability] {
                    let stem = format!("{}_{}_{}", layer.grid, layer.slab.name, raster.kind.as_str());
                    emit_raster(raster, &dir.join(&stem), &meta)?;
                    files.push(format!("{stem}.csv"));
                    files.push(format!("{stem}.ppm"));
                }
            }
            let report = self.report(rig, files)?;
            let path = dir.join("report.json");
            report.write(&path)?;
            out.push((path, report));
        }
        Ok(out)
    }
}
