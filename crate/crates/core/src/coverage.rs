//! Blind-spot radii, bird's-eye coverage grids and region-of-interest summaries.

use serde::{Deserialize, Serialize};

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kdtree::KdTree;

pub const DEFAULT_R_THRESH: f64 = 0.4;
pub const DEFAULT_TIMESTEPS: usize = 4096;

/// A z-interval of the vehicle frame, half-open `[z_min, z_max)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerticalSlab {
    pub name: String,
    pub z_min: f64,
    pub z_max: f64,
}

impl VerticalSlab {
    pub fn new(name: impl Into<String>, z_min: f64, z_max: f64) -> Result<Self> {
        let s = VerticalSlab { name: name.into(), z_min, z_max };
        s.validate()?;
        Ok(s)
    }

    pub fn ground() -> Self {
        VerticalSlab { name: "ground".into(), z_min: -0.5, z_max: 0.5 }
    }

    pub fn obstacles() -> Self {
        VerticalSlab { name: "obstacles".into(), z_min: 0.5, z_max: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_min < self.z_max) {
            return Err(Error::config(format!("slabs.{}", self.name), "z_min must be below z_max"));
        }
        Ok(())
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z < self.z_max
    }
}

/// Axis-aligned raster over the vehicle-frame ground plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, cell_size: f64) -> Result<Self> {
        let g = GridSpec { x_min, x_max, y_min, y_max, cell_size };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::config("cell_size", "must be positive"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::config("extent", "grid extents must be positive"));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.y_min.is_finite() && self.y_max.is_finite()) {
            return Err(Error::config("extent", "grid bounds must be finite"));
        }
        Ok(())
    }

    /// Cells along x (rows).
    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.cell_size).ceil() as usize
    }

    /// Cells along y (columns).
    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.cell_size).ceil() as usize
    }

    pub fn cell_count(&self) -> usize {
        self.nx() * self.ny()
    }

    /// Row-major cell index (row = x bin) of a point inside `[min, max)` on both axes.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max) {
            return None;
        }
        let ix = (((x - self.x_min) / self.cell_size) as usize).min(self.nx() - 1);
        let iy = (((y - self.y_min) / self.cell_size) as usize).min(self.ny() - 1);
        Some(ix * self.ny() + iy)
    }

    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (ix, iy) = (index / self.ny(), index % self.ny());
        (self.x_min + (ix as f64 + 0.5) * self.cell_size, self.y_min + (iy as f64 + 0.5) * self.cell_size)
    }

    /// Upper bound applied to radii before averaging.
    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }
}

/// A reference point and its blind-spot radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub point: Vec3,
    pub radius: f64,
}

fn check_pair(reference: &PointCloud, sensors: &PointCloud) -> Result<()> {
    if reference.frame() != &Frame::Vehicle || sensors.frame() != &Frame::Vehicle {
        return Err(Error::contract(format!(
            "blind-spot radii need vehicle-frame clouds, got {} and {}",
            reference.frame(),
            sensors.frame()
        )));
    }
    if reference.timestep() != sensors.timestep() {
        return Err(Error::contract(format!(
            "reference cloud is from timestep {} but sensor cloud from {}",
            reference.timestep(),
            sensors.timestep()
        )));
    }
    Ok(())
}

/// Distance from every reference point to the nearest sensor point; `+∞` if there are none.
pub fn blind_spot_radii(reference: &PointCloud, sensors: &PointCloud) -> Result<Vec<Probe>> {
    check_pair(reference, sensors)?;
    let tree = KdTree::build(sensors.points());
    Ok(radii_from_index(&tree, reference.points()))
}

pub fn radii_from_index(tree: &KdTree, queries: &[Vec3]) -> Vec<Probe> {
    tree.nearest_batch(queries)
        .into_iter()
        .zip(queries)
        .map(|(nn, &point)| Probe { point, radius: nn.distance })
        .collect()
}

/// How probes of one cell are combined across timesteps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// One mean over every probe the cell ever received.
    #[default]
    Pooled,
    /// Mean over timesteps of the per-timestep cell mean; timesteps without probes are skipped.
    PerTimestep,
}

/// Statistic of the radius map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    /// Largest clamped radius seen in the cell.
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    MeanBlindSpotRadius,
    MaxBlindSpotRadius,
    DetectionProbability,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueKind::MeanBlindSpotRadius => "mean_blind_spot_radius",
            ValueKind::MaxBlindSpotRadius => "max_blind_spot_radius",
            ValueKind::DetectionProbability => "detection_probability",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ValueKind::MeanBlindSpotRadius, ValueKind::MaxBlindSpotRadius, ValueKind::DetectionProbability]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// Per-cell accumulators for one grid and slab.
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    spec: GridSpec,
    slab: VerticalSlab,
    r_cap: f64,
    sum_r: Vec<f64>,
    hit_count: Vec<u64>,
    probe_count: Vec<u64>,
    max_r: Vec<f64>,
    // per-timestep means summed over timesteps
    step_mean_r: Vec<f64>,
    step_mean_p: Vec<f64>,
    step_count: Vec<u64>,
    clamped: u64,
    // scratch for the current timestep
    scratch_sum: Vec<f64>,
    scratch_hits: Vec<u64>,
    scratch_probes: Vec<u64>,
    touched: Vec<usize>,
}

impl CoverageGrid {
    pub fn new(spec: GridSpec, slab: VerticalSlab) -> Result<Self> {
        spec.validate()?;
        slab.validate()?;
        let n = spec.cell_count();
        Ok(CoverageGrid {
            r_cap: spec.diagonal(),
            spec,
            slab,
            sum_r: vec![0.0; n],
            hit_count: vec![0; n],
            probe_count: vec![0; n],
            max_r: vec![0.0; n],
            step_mean_r: vec![0.0; n],
            step_mean_p: vec![0.0; n],
            step_count: vec![0; n],
            clamped: 0,
            scratch_sum: vec![0.0; n],
            scratch_hits: vec![0; n],
            scratch_probes: vec![0; n],
            touched: Vec::new(),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn slab(&self) -> &VerticalSlab {
        &self.slab
    }

    pub fn r_cap(&self) -> f64 {
        self.r_cap
    }

    /// Probes whose radius exceeded `r_cap` and were clamped.
    pub fn clamped_count(&self) -> u64 {
        self.clamped
    }

    pub fn sum_r(&self) -> &[f64] {
        &self.sum_r
    }

    pub fn hit_count(&self) -> &[u64] {
        &self.hit_count
    }

    pub fn probe_count(&self) -> &[u64] {
        &self.probe_count
    }

    pub fn total_probes(&self) -> u64 {
        self.probe_count.iter().sum()
    }

    /// Cell index of a point, if it lies in the slab and the grid.
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        if !self.slab.contains(p.z) {
            return None;
        }
        self.spec.cell_of(p.x, p.y)
    }

    /// Adds one timestep of probes. Radii above the grid diagonal are clamped to it;
    /// a probe counts as a detection when its unclamped radius is `<= r_thresh`.
    pub fn accumulate(&mut self, samples: &[Probe], r_thresh: f64) {
        for s in samples {
            if let Some(c) = self.locate(s.point) {
                self.add(c, s.radius, r_thresh);
            }
        }
        self.end_timestep();
    }

    /// Like [`CoverageGrid::accumulate`] with precomputed cell indices.
    pub fn accumulate_located(&mut self, cells: &[usize], radii: &[f64], r_thresh: f64) {
        for (&c, &r) in cells.iter().zip(radii) {
            self.add(c, r, r_thresh);
        }
        self.end_timestep();
    }

    fn add(&mut self, c: usize, r: f64, r_thresh: f64) {
        let hit = r <= r_thresh;
        let r = if r > self.r_cap {
            self.clamped += 1;
            self.r_cap
        } else {
            r
        };
        if self.scratch_probes[c] == 0 {
            self.touched.push(c);
        }
        self.sum_r[c] += r;
        self.hit_count[c] += hit as u64;
        self.probe_count[c] += 1;
        if r > self.max_r[c] {
            self.max_r[c] = r;
        }
        self.scratch_sum[c] += r;
        self.scratch_hits[c] += hit as u64;
        self.scratch_probes[c] += 1;
    }

    fn end_timestep(&mut self) {
        for &c in &self.touched {
            let n = self.scratch_probes[c] as f64;
            self.step_mean_r[c] += self.scratch_sum[c] / n;
            self.step_mean_p[c] += self.scratch_hits[c] as f64 / n;
            self.step_count[c] += 1;
            self.scratch_sum[c] = 0.0;
            self.scratch_hits[c] = 0;
            self.scratch_probes[c] = 0;
        }
        self.touched.clear();
    }

    pub fn finalize(&self) -> FinalizedGrid {
        self.finalize_with(Averaging::Pooled, Aggregation::Mean)
    }

    pub fn finalize_with(&self, averaging: Averaging, aggregation: Aggregation) -> FinalizedGrid {
        let n = self.spec.cell_count();
        let mut radius = Vec::with_capacity(n);
        let mut probability = Vec::with_capacity(n);
        for c in 0..n {
            if self.probe_count[c] == 0 {
                radius.push(None);
                probability.push(None);
                continue;
            }
            let (r, p) = match averaging {
                Averaging::Pooled => {
                    let k = self.probe_count[c] as f64;
                    (self.sum_r[c] / k, self.hit_count[c] as f64 / k)
                }
                Averaging::PerTimestep => {
                    let k = self.step_count[c] as f64;
                    (self.step_mean_r[c] / k, self.step_mean_p[c] / k)
                }
            };
            radius.push(Some(match aggregation {
                Aggregation::Mean => r,
                Aggregation::Max => self.max_r[c],
            }));
            probability.push(Some(p));
        }
        let radius_kind = match aggregation {
            Aggregation::Mean => ValueKind::MeanBlindSpotRadius,
            Aggregation::Max => ValueKind::MaxBlindSpotRadius,
        };
        FinalizedGrid {
            radius: Raster { spec: self.spec.clone(), slab: self.slab.clone(), kind: radius_kind, values: radius },
            probability: Raster {
                spec: self.spec.clone(),
                slab: self.slab.clone(),
                kind: ValueKind::DetectionProbability,
                values: probability,
            },
        }
    }
}

/// Row-major per-cell values; `None` marks cells without probes.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub spec: GridSpec,
    pub slab: VerticalSlab,
    pub kind: ValueKind,
    pub values: Vec<Option<f64>>,
}

impl Raster {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[ix * self.spec.ny() + iy]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalizedGrid {
    pub radius: Raster,
    pub probability: Raster,
}

/// Rectangle of the ground plane summarized on one slab.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub name: String,
    pub slab: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Roi {
    /// Forward-facing region `x ∈ [0, range]` with a 2:1 aspect ratio.
    pub fn forward(label: &str, range: f64, slab: &str) -> Self {
        Roi {
            name: format!("{label} ({range} m) {slab}"),
            slab: slab.to_string(),
            x_min: 0.0,
            x_max: range,
            y_min: -range / 4.0,
            y_max: range / 4.0,
        }
    }

    /// Close, medium and long range on both default slabs.
    pub fn presets() -> Vec<Roi> {
        let mut out = Vec::new();
        for slab in ["ground", "obstacles"] {
            for (label, range) in [("close range", 20.0), ("medium range", 80.0), ("long range", 160.0)] {
                out.push(Roi::forward(label, range, slab));
            }
        }
        out
    }

    /// A cell belongs to the region when its center lies in `[min, max)` on both axes.
    pub fn contains_center(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn within(&self, spec: &GridSpec) -> bool {
        self.x_min >= spec.x_min && self.x_max <= spec.x_max && self.y_min >= spec.y_min && self.y_max <= spec.y_max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiSummary {
    pub roi: String,
    /// `None` when the region has no probed cells.
    pub mean_blind_spot_radius: Option<f64>,
    pub mean_detection_probability: Option<f64>,
    pub nonempty_cell_count: usize,
}

impl RoiSummary {
    pub fn has_data(&self) -> bool {
        self.nonempty_cell_count > 0
    }
}

/// Unweighted mean over the probed cells whose centers fall in `roi`.
pub fn summarize(grid: &FinalizedGrid, roi: &Roi) -> Result<RoiSummary> {
    let spec = &grid.radius.spec;
    if !roi.within(spec) {
        return Err(Error::contract(format!("region '{}' extends beyond its grid", roi.name)));
    }
    let mut sum_r = 0.0;
    let mut sum_p = 0.0;
    let mut n = 0usize;
    for c in 0..spec.cell_count() {
        let (x, y) = spec.cell_center(c);
        if !roi.contains_center(x, y) {
            continue;
        }
        if let (Some(r), Some(p)) = (grid.radius.values[c], grid.probability.values[c]) {
            sum_r += r;
            sum_p += p;
            n += 1;
        }
    }
    Ok(RoiSummary {
        roi: roi.name.clone(),
        mean_blind_spot_radius: (n > 0).then(|| sum_r / n as f64),
        mean_detection_probability: (n > 0).then(|| sum_p / n as f64),
        nonempty_cell_count: n,
    })
}
