//! Closed-form two-body solutions used as oracles for the numerical paths.
//!
//! The relative coordinate of a pair with intensity sum `S` obeys
//! `dz/dt = -S / conj(z)`, so `r dr/dt = -Re S` and `r^2 dθ/dt = -Im S`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBodySolution {
    /// Intensity sum of the pair.
    pub sum: Complex64,
    pub r0: f64,
    pub theta0: f64,
    pub collision_time: Option<f64>,
}

impl TwoBodySolution {
    pub fn new(sum: Complex64, r0: f64, theta0: f64) -> Self {
        Self {
            sum,
            r0,
            theta0,
            collision_time: collision_time(sum, r0),
        }
    }

    /// Solution through the relative position `z0` at `t = 0`.
    pub fn through(sum: Complex64, z0: Complex64) -> Self {
        Self::new(sum, z0.norm(), z0.arg())
    }

    fn check(&self, t: f64) -> Result<f64> {
        let r2 = self.r0 * self.r0 - 2.0 * t * self.sum.re;
        if let Some(tc) = self.collision_time {
            if t >= tc {
                return Err(Error::BeyondCollision { t, collision_time: tc });
            }
        }
        if r2 <= 0.0 {
            return Err(Error::DomainExhausted(r2));
        }
        Ok(r2)
    }

    /// Radius and unwrapped polar angle at time `t`.
    pub fn polar(&self, t: f64) -> Result<(f64, f64)> {
        let r2 = self.check(t)?;
        let (re, im) = (self.sum.re, self.sum.im);
        let theta = if im == 0.0 {
            self.theta0
        } else if re == 0.0 {
            self.theta0 - im * t / (self.r0 * self.r0)
        } else {
            self.theta0 + im / (2.0 * re) * (r2 / (self.r0 * self.r0)).ln()
        };
        Ok((r2.sqrt(), theta))
    }

    /// Relative position `z(t)`.
    pub fn state(&self, t: f64) -> Result<Complex64> {
        if self.sum == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::from_polar(self.r0, self.theta0));
        }
        let (r, theta) = self.polar(t)?;
        Ok(Complex64::from_polar(r, theta))
    }
}

pub fn two_body_state(solution: &TwoBodySolution, t: f64) -> Result<Complex64> {
    solution.state(t)
}

/// `r0^2 / (2 Re S)` when the pair contracts, otherwise `None`.
pub fn collision_time(sum: Complex64, r0: f64) -> Option<f64> {
    (sum.re > 0.0).then(|| r0 * r0 / (2.0 * sum.re))
}

/// Radius of a particle around a fixed single source: `r^2 = r0^2 - 2 γ t`.
pub fn single_source_radius(gamma: f64, r0: f64, t: f64) -> Result<f64> {
    let r2 = r0 * r0 - 2.0 * gamma * t;
    if r2 <= 0.0 {
        return Err(Error::DomainExhausted(r2));
    }
    Ok(r2.sqrt())
}

/// Blown-up two-body solution `K e^{-S s}`.
pub fn blowup_two_body(k: Complex64, sum: Complex64, s: f64) -> Complex64 {
    k * (-sum * s).exp()
}

/// Physical time elapsed after `s` units of blow-up time starting from `|K|`:
/// the integral of `|K|^2 e^{-2 Re S s}`.
pub fn blowup_elapsed_time(k: Complex64, sum: Complex64, s: f64) -> f64 {
    let k2 = k.norm_sqr();
    if sum.re == 0.0 {
        k2 * s
    } else {
        k2 * -(-2.0 * sum.re * s).exp_m1() / (2.0 * sum.re)
    }
}
