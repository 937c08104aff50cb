//! Triangle-mesh scenes, BVH ray casting and per-timestep world snapshots.

mod bvh;
mod mesh;
mod ray;
mod world;

pub use bvh::Bvh;
pub use mesh::{TriangleMesh, MIN_TRIANGLE_AREA};
pub use ray::{Hit, Ray, RAY_EPSILON};
pub use world::{point_triangle_distance, Actor, Keyframe, Trajectory, WorldSnapshot};
