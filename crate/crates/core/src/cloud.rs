//! Point clouds tagged with the coordinate frame they live in.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Sensor(String),
    Vehicle,
    World,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Sensor(id) => write!(f, "sensor:{id}"),
            Frame::Vehicle => f.write_str("vehicle"),
            Frame::World => f.write_str("world"),
        }
    }
}

/// A rigid transform that knows which frames it maps between.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTransform {
    pub source: Frame,
    pub target: Frame,
    pub transform: RigidTransform,
}

impl FrameTransform {
    pub fn new(source: Frame, target: Frame, transform: RigidTransform) -> Self {
        Self { source, target, transform }
    }

    pub fn inverse(&self) -> Self {
        Self { source: self.target.clone(), target: self.source.clone(), transform: self.transform.inverse() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    frame: Frame,
    timestep: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame, timestep: usize) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::contract(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points, frame, timestep })
    }

    pub fn empty(frame: Frame, timestep: usize) -> Self {
        Self { points: Vec::new(), frame, timestep }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies `p ↦ R·p + t` to every point and retags the cloud with the target frame.
    pub fn transformed(&self, t: &FrameTransform) -> Result<PointCloud> {
        if t.source != self.frame {
            return Err(Error::contract(format!(
                "cloud is in frame {} but transform expects {}",
                self.frame, t.source
            )));
        }
        Ok(PointCloud {
            points: self.points.iter().map(|&p| t.transform.apply(p)).collect(),
            frame: t.target.clone(),
            timestep: self.timestep,
        })
    }

    /// Concatenates clouds that share frame and timestep.
    pub fn fuse<'a, I>(clouds: I, frame: Frame, timestep: usize) -> Result<PointCloud>
    where
        I: IntoIterator<Item = &'a PointCloud>,
    {
        let mut points = Vec::new();
        for c in clouds {
            if c.frame != frame || c.timestep != timestep {
                return Err(Error::contract(format!(
                    "cannot fuse cloud ({}, t={}) into ({frame}, t={timestep})",
                    c.frame, c.timestep
                )));
            }
            points.extend_from_slice(&c.points);
        }
        Ok(PointCloud { points, frame, timestep })
    }
}
