use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Hits closer than this to the ray origin are ignored.
pub const RAY_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
    max_range: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, max_range: f64) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::contract("ray origin is not finite"));
        }
        if !((direction.norm() - 1.0).abs() <= 1e-12) {
            return Err(Error::contract(format!("ray direction {direction:?} is not unit length")));
        }
        if !(max_range > 0.0) {
            return Err(Error::contract(format!("ray max_range must be positive, got {max_range}")));
        }
        Ok(Self { origin, direction, max_range })
    }

    /// Normalizes `direction` before construction.
    pub fn towards(origin: Vec3, direction: Vec3, max_range: f64) -> Result<Self> {
        Ray::new(origin, direction.normalized(), max_range)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    pub distance: f64,
    /// Index of the actor in the world snapshot.
    pub actor: u32,
    /// Index of the triangle in the world snapshot.
    pub triangle: u32,
}

/// Per-ray constants for the watertight ray/triangle test.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RayPrecomp {
    pub origin: [f64; 3],
    pub inv_dir: [f64; 3],
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl RayPrecomp {
    pub fn new(ray: &Ray) -> Self {
        let d = ray.direction.to_array();
        let mut kz = 0;
        if d[1].abs() > d[kz].abs() {
            kz = 1;
        }
        if d[2].abs() > d[kz].abs() {
            kz = 2;
        }
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if d[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            origin: ray.origin.to_array(),
            inv_dir: [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]],
            kx,
            ky,
            kz,
            sx: d[kx] / d[kz],
            sy: d[ky] / d[kz],
            sz: 1.0 / d[kz],
        }
    }

    /// Watertight intersection; returns the ray parameter if it lies in `(t_min, t_max]`.
    #[inline]
    pub fn intersect(&self, tri: &[[f64; 3]; 3], t_min: f64, t_max: f64) -> Option<f64> {
        let o = &self.origin;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let a = [tri[0][0] - o[0], tri[0][1] - o[1], tri[0][2] - o[2]];
        let b = [tri[1][0] - o[0], tri[1][1] - o[1], tri[1][2] - o[2]];
        let c = [tri[2][0] - o[0], tri[2][1] - o[1], tri[2][2] - o[2]];
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let mut det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let az = self.sz * a[kz];
        let bz = self.sz * b[kz];
        let cz = self.sz * c[kz];
        let mut t_scaled = u * az + v * bz + w * cz;
        if det < 0.0 {
            det = -det;
            t_scaled = -t_scaled;
        }
        let t = t_scaled / det;
        (t > t_min && t <= t_max).then_some(t)
    }
}
