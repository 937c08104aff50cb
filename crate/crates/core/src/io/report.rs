//! Run reports and side-by-side comparison of two rigs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::RoiSummary;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampCount {
    pub grid: String,
    pub slab: String,
    pub clamped: u64,
    pub probes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub timesteps: usize,
    pub config_sha256: String,
    pub version: String,
    pub r_thresh: f64,
    pub averaging: String,
    pub aggregation: String,
    /// Reference sensor description, including any reduction from the default resolution.
    pub reference: String,
    pub sensor_count: usize,
    pub clamped: Vec<ClampCount>,
    pub notes: Vec<String>,
}

impl RunMetadata {
    /// Key/value pairs embedded in emitted rasters.
    pub fn pairs(&self, scenario: &str, rig: &str) -> Vec<(String, String)> {
        vec![
            ("scenario".into(), scenario.into()),
            ("rig".into(), rig.into()),
            ("seed".into(), self.seed.to_string()),
            ("timesteps".into(), self.timesteps.to_string()),
            ("config_sha256".into(), self.config_sha256.clone()),
            ("version".into(), self.version.clone()),
            ("r_thresh".into(), self.r_thresh.to_string()),
            ("reference".into(), self.reference.clone()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub rig: String,
    pub metadata: RunMetadata,
    pub summaries: Vec<RoiSummary>,
    pub rasters: Vec<String>,
}

impl CoverageReport {
    pub fn summary(&self, roi: &str) -> Option<&RoiSummary> {
        self.summaries.iter().find(|s| s.roi == roi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::parse(path.display().to_string(), format!("{} (line {})", e.path(), inner.line()), inner.to_string())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `a − b`.
    pub delta: Option<f64>,
    pub winner: Option<Winner>,
}

impl MetricDelta {
    fn new(a: Option<f64>, b: Option<f64>, lower_is_better: bool) -> Self {
        let (delta, winner) = match (a, b) {
            (Some(x), Some(y)) => {
                let w = if x == y {
                    Winner::Tie
                } else if (x < y) == lower_is_better {
                    Winner::A
                } else {
                    Winner::B
                };
                (Some(x - y), Some(w))
            }
            _ => (None, None),
        };
        MetricDelta { a, b, delta, winner }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub roi: String,
    pub detection_probability: MetricDelta,
    pub blind_spot_radius: MetricDelta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub rows: Vec<ComparisonRow>,
}

/// Per-region deltas; lower radius and higher probability win.
pub fn compare_reports(a: &CoverageReport, b: &CoverageReport) -> Result<Comparison> {
    let mut names_a: Vec<&str> = a.summaries.iter().map(|s| s.roi.as_str()).collect();
    let mut names_b: Vec<&str> = b.summaries.iter().map(|s| s.roi.as_str()).collect();
    names_a.sort_unstable();
    names_b.sort_unstable();
    if names_a != names_b {
        return Err(Error::contract("reports cover different regions of interest"));
    }
    let rows = a
        .summaries
        .iter()
        .map(|sa| {
            let sb = b.summary(&sa.roi).expect("region sets match");
            ComparisonRow {
                roi: sa.roi.clone(),
                detection_probability: MetricDelta::new(
                    sa.mean_detection_probability,
                    sb.mean_detection_probability,
                    false,
                ),
                blind_spot_radius: MetricDelta::new(sa.mean_blind_spot_radius, sb.mean_blind_spot_radius, true),
            }
        })
        .collect();
    Ok(Comparison { a: a.rig.clone(), b: b.rig.clone(), rows })
}

impl Comparison {
    /// Markdown table: probabilities in percent, radii in meters, winners in bold.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let cell = |v: Option<f64>, bold: bool, scale: f64| match v {
            None => "no data".to_string(),
            Some(x) if bold => format!("**{:.2}**", x * scale),
            Some(x) => format!("{:.2}", x * scale),
        };
        let sections: [(&str, fn(&ComparisonRow) -> &MetricDelta, f64); 2] = [
            ("mean detection probability [%] ↑", |r| &r.detection_probability, 100.0),
            ("mean blind spot radius [m] ↓", |r| &r.blind_spot_radius, 1.0),
        ];
        writeln!(s, "| region of interest | {} | {} | delta (a - b) |", self.a, self.b).unwrap();
        writeln!(s, "|---|---:|---:|---:|").unwrap();
        for (title, pick, scale) in sections {
            writeln!(s, "| *{title}* | | | |").unwrap();
            for row in &self.rows {
                let m = pick(row);
                let a_bold = matches!(m.winner, Some(Winner::A));
                let b_bold = matches!(m.winner, Some(Winner::B));
                writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    row.roi,
                    cell(m.a, a_bold, scale),
                    cell(m.b, b_bold, scale),
                    cell(m.delta, false, scale)
                )
                .unwrap();
            }
        }
        s
    }
}
