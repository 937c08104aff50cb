use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INVERSION_MAX_ITERATIONS: usize = 50;
pub const INVERSION_TOLERANCE: f64 = 1e-10;

/// Lens distortion mapping undistorted lens-plane coordinates to distorted image-plane coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionModel {
    #[default]
    None,
    /// `d = p · (1 + k1·r² + k2·r⁴ + k3·r⁶)` with `r = |p|`.
    RadialPolynomial {
        k1: f64,
        #[serde(default)]
        k2: f64,
        #[serde(default)]
        k3: f64,
    },
}

impl DistortionModel {
    fn radial_factor(&self, r2: f64) -> f64 {
        match *self {
            DistortionModel::None => 1.0,
            DistortionModel::RadialPolynomial { k1, k2, k3 } => 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)),
        }
    }

    /// d/dr of `r · factor(r²)`.
    fn radial_slope(&self, r2: f64) -> f64 {
        match *self {
            DistortionModel::None => 1.0,
            DistortionModel::RadialPolynomial { k1, k2, k3 } => 1.0 + r2 * (3.0 * k1 + r2 * (5.0 * k2 + r2 * 7.0 * k3)),
        }
    }

    pub fn distort(&self, p: [f64; 2]) -> [f64; 2] {
        let f = self.radial_factor(p[0] * p[0] + p[1] * p[1]);
        [p[0] * f, p[1] * f]
    }

    /// Newton iteration on the radial magnitude. Fails if the radial map is not
    /// increasing along the way or the residual stays above tolerance.
    pub fn undistort(&self, d: [f64; 2]) -> Result<[f64; 2]> {
        if let DistortionModel::None = self {
            return Ok(d);
        }
        let rd = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if rd == 0.0 {
            return Ok([0.0, 0.0]);
        }
        let mut r = rd;
        for _ in 0..INVERSION_MAX_ITERATIONS {
            let r2 = r * r;
            let residual = r * self.radial_factor(r2) - rd;
            if residual.abs() < INVERSION_TOLERANCE {
                let s = r / rd;
                return Ok([d[0] * s, d[1] * s]);
            }
            let slope = self.radial_slope(r2);
            if !(slope > 0.0) {
                break;
            }
            r -= residual / slope;
            if !(r >= 0.0) {
                break;
            }
        }
        Err(Error::Numeric(format!(
            "distortion inversion did not converge at image-plane point ({:.6}, {:.6})",
            d[0], d[1]
        )))
    }

    /// Whether the radial map is strictly increasing on `[0, r_max]`, checked on a dense sample.
    pub fn is_monotone_up_to(&self, r_max: f64) -> bool {
        const SAMPLES: usize = 4096;
        (0..=SAMPLES).all(|i| {
            let r = r_max * i as f64 / SAMPLES as f64;
            self.radial_slope(r * r) > 0.0
        })
    }
}
