//! Blind-spot estimation for vehicle sensor setups.
//!
//! Sensor clouds (LiDAR scans and unprojected depth images) are compared against a
//! randomly re-posed dense reference LiDAR. Every reference point is a probe whose
//! distance to the nearest sensor detection is its blind-spot radius; radii are
//! binned into bird's-eye grids and averaged over regions of interest.

pub mod cloud;
pub mod config;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod pipeline;
pub mod presets;
pub mod reference;
pub mod scene;
pub mod sensor;

pub use cloud::{Frame, FrameTransform, PointCloud};
pub use error::{Error, Result};
pub use geometry::{Aabb, Mat3, RigidTransform, Vec3};
