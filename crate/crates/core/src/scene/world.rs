use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

use super::bvh::Bvh;
use super::mesh::TriangleMesh;
use super::ray::{Hit, Ray, RayPrecomp, RAY_EPSILON};

/// Local→world pose of an actor over time.
#[derive(Clone, Debug, PartialEq)]
pub enum Trajectory {
    Static(RigidTransform),
    /// `start` translated by `velocity` (world meters per timestep) each step.
    Linear {
        start: RigidTransform,
        velocity: Vec3,
    },
    /// Piecewise-linear interpolation of translation and yaw between keyframes
    /// sorted by timestep; undefined outside the keyframe span.
    Keyframes(Vec<Keyframe>),
    /// One pose per timestep, starting at timestep 0.
    Explicit(Vec<RigidTransform>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub timestep: usize,
    pub translation: Vec3,
    /// Radians.
    pub yaw: f64,
}

impl Trajectory {
    pub fn pose_at(&self, t: usize) -> Option<RigidTransform> {
        match self {
            Trajectory::Static(p) => Some(*p),
            Trajectory::Linear { start, velocity } => {
                Some(RigidTransform::from_translation(*velocity * t as f64).compose(start))
            }
            Trajectory::Keyframes(keys) => {
                let first = keys.first()?;
                let last = keys.last()?;
                if t < first.timestep || t > last.timestep {
                    return None;
                }
                let i = keys.partition_point(|k| k.timestep <= t);
                let a = keys[i - 1];
                if a.timestep == t || i == keys.len() {
                    return Some(RigidTransform::from_ypr(a.yaw, 0.0, 0.0, a.translation));
                }
                let b = keys[i];
                let s = (t - a.timestep) as f64 / (b.timestep - a.timestep) as f64;
                let translation = a.translation + (b.translation - a.translation) * s;
                let yaw = a.yaw + (b.yaw - a.yaw) * s;
                Some(RigidTransform::from_ypr(yaw, 0.0, 0.0, translation))
            }
            Trajectory::Explicit(poses) => poses.get(t).copied(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Actor {
    pub id: String,
    pub mesh: Arc<TriangleMesh>,
    pub trajectory: Trajectory,
    pub is_ego: bool,
}

impl Actor {
    pub fn new(id: impl Into<String>, mesh: TriangleMesh, trajectory: Trajectory, is_ego: bool) -> Self {
        Self { id: id.into(), mesh: Arc::new(mesh), trajectory, is_ego }
    }

    pub fn pose_at(&self, t: usize) -> Result<RigidTransform> {
        self.trajectory
            .pose_at(t)
            .ok_or_else(|| Error::scenario(format!("actor {:?} has no trajectory entry for timestep {t}", self.id)))
    }
}

/// Immutable world-space geometry for one timestep.
#[derive(Clone, Debug)]
pub struct WorldSnapshot {
    timestep: usize,
    triangles: Vec<[[f64; 3]; 3]>,
    triangle_actor: Vec<u32>,
    actor_ids: Vec<String>,
    actor_is_ego: Vec<bool>,
    bvh: Bvh,
}

impl WorldSnapshot {
    /// Places every actor at its pose for timestep `t` and builds the hierarchy.
    pub fn build(actors: &[Actor], t: usize) -> Result<WorldSnapshot> {
        let mut triangles = Vec::new();
        let mut triangle_actor = Vec::new();
        for (ai, actor) in actors.iter().enumerate() {
            let pose = actor.pose_at(t)?;
            let mesh = &actor.mesh;
            let world: Vec<Vec3> = mesh.vertices().iter().map(|&v| pose.apply(v)).collect();
            for tri in mesh.triangles() {
                triangles.push(tri.map(|k| world[k as usize].to_array()));
                triangle_actor.push(ai as u32);
            }
        }
        let as_vec: Vec<[Vec3; 3]> = triangles.iter().map(|t| t.map(Vec3::from)).collect();
        let bvh = Bvh::build(&as_vec);
        Ok(WorldSnapshot {
            timestep: t,
            triangles,
            triangle_actor,
            actor_ids: actors.iter().map(|a| a.id.clone()).collect(),
            actor_is_ego: actors.iter().map(|a| a.is_ego).collect(),
            bvh,
        })
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(Vec3::from)
    }

    pub fn triangle_actor(&self, i: usize) -> u32 {
        self.triangle_actor[i]
    }

    pub fn actor_id(&self, actor: u32) -> &str {
        &self.actor_ids[actor as usize]
    }

    pub fn is_ego(&self, actor: u32) -> bool {
        self.actor_is_ego[actor as usize]
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Nearest hit with distance in `(RAY_EPSILON, max_range]`.
    pub fn cast_ray(&self, ray: &Ray) -> Option<Hit> {
        let pre = RayPrecomp::new(ray);
        let (t, tri) = self.bvh.closest_hit(&pre, RAY_EPSILON, ray.max_range(), |i| self.triangles[i as usize])?;
        Some(self.make_hit(ray, t, tri))
    }

    /// Reference implementation testing every triangle; same result as [`WorldSnapshot::cast_ray`].
    pub fn cast_ray_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let pre = RayPrecomp::new(ray);
        let mut best: Option<(f64, u32)> = None;
        for (i, tri) in self.triangles.iter().enumerate() {
            let limit = best.map_or(ray.max_range(), |b| b.0);
            if let Some(t) = pre.intersect(tri, RAY_EPSILON, limit) {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, i as u32));
                }
            }
        }
        best.map(|(t, tri)| self.make_hit(ray, t, tri))
    }

    fn make_hit(&self, ray: &Ray, t: f64, tri: u32) -> Hit {
        Hit { point: ray.at(t), distance: t, actor: self.triangle_actor[tri as usize], triangle: tri }
    }

    /// Distance from `p` to the closest triangle, optionally restricted by actor.
    pub fn distance_to_surface(&self, p: Vec3, mut include: impl FnMut(u32) -> bool) -> f64 {
        let mut best = f64::INFINITY;
        for (i, tri) in self.triangles.iter().enumerate() {
            if include(self.triangle_actor[i]) {
                best = best.min(point_triangle_distance(p, tri.map(Vec3::from)));
            }
        }
        best
    }
}

/// Euclidean distance from a point to a closed triangle.
pub fn point_triangle_distance(p: Vec3, [a, b, c]: [Vec3; 3]) -> f64 {
    // Ericson, closest point on triangle
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return p.distance(a);
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return p.distance(b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return p.distance(a + ab * v);
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return p.distance(c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return p.distance(a + ac * w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return p.distance(b + (c - b) * w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    p.distance(a + ab * v + ac * w)
}
