//! Relative coordinates, time-rescaled (blown-up) fields and the collinear
//! two-body regularization.
//!
//! With a base particle `b`, the relative coordinates are `xi_j = z_b - z_j`
//! for every other particle `j`, listed in particle order. Every pairwise
//! difference follows from them (`z_k - z_j = xi_j - xi_k`), so together with
//! the momentum `Z` they determine the configuration whenever the total
//! intensity is nonzero.
//!
//! Rescaling time by `dt/ds = prod_{j in sel} |xi_j|^2` turns the selected
//! binary collisions `xi_j = 0` into equilibria. The product is distributed
//! over the terms of the relative field before evaluation, so each singular
//! `1/conj(xi_j)` becomes the polynomial `xi_j * prod_{m != j} |xi_m|^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::dopri::{self, Finish, Verdict};
use crate::integrate::IntegratorOptions;
use crate::model::{Intensity, Particle, SystemState, MIN_SEPARATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    /// `Z = sum G_k z_k`.
    pub momentum: Complex64,
    /// Intensities in particle order.
    pub intensities: Vec<Intensity>,
    /// Particle ids in particle order.
    pub ids: Vec<usize>,
    /// Index of the base particle.
    pub base: usize,
    /// `xi[j]` belongs to the `j`-th non-base particle.
    pub xi: Vec<Complex64>,
    /// Blow-up time.
    pub s: f64,
    /// Physical time.
    pub t: f64,
}

impl RelativeState {
    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// Particle index of every relative coordinate.
    pub fn others(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| k != self.base).collect()
    }

    /// Relative-coordinate index belonging to particle `particle`.
    pub fn coordinate_of(&self, particle: usize) -> Option<usize> {
        if particle == self.base || particle >= self.len() {
            None
        } else if particle < self.base {
            Some(particle)
        } else {
            Some(particle - 1)
        }
    }

    pub fn total_intensity(&self) -> Complex64 {
        self.intensities.iter().map(|g| g.value()).sum()
    }

    /// Non-base intensities followed by the base intensity.
    fn chart_intensities(&self) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = self.others().iter().map(|&k| self.intensities[k].value()).collect();
        g.push(self.intensities[self.base].value());
        g
    }
}

/// Relative coordinates with the last particle as base.
pub fn to_relative(state: &SystemState) -> Result<RelativeState> {
    if state.len() < 2 {
        return Err(Error::TooFewParticles {
            needed: 2,
            found: state.len(),
        });
    }
    to_relative_with_base(state, state.len() - 1)
}

pub fn to_relative_with_base(state: &SystemState, base: usize) -> Result<RelativeState> {
    let n = state.len();
    if n < 2 {
        return Err(Error::TooFewParticles { needed: 2, found: n });
    }
    if base >= n {
        return Err(Error::InvalidSelection(format!("base particle {base} out of range for {n} particles")));
    }
    let z = state.positions();
    let xi = (0..n).filter(|&k| k != base).map(|k| z[base] - z[k]).collect();
    Ok(RelativeState {
        momentum: crate::model::linear_momentum(state),
        intensities: state.particles.iter().map(|p| p.intensity).collect(),
        ids: state.ids(),
        base,
        xi,
        s: 0.0,
        t: state.time,
    })
}

fn assemble(rel: &RelativeState, base_position: Complex64) -> SystemState {
    let mut positions = vec![base_position; rel.len()];
    for (j, k) in rel.others().into_iter().enumerate() {
        positions[k] = base_position - rel.xi[j];
    }
    let particles = positions
        .into_iter()
        .zip(rel.intensities.iter().zip(&rel.ids))
        .map(|(z, (&g, &id))| Particle::new(id, z, g))
        .collect();
    SystemState {
        time: rel.t,
        particles,
    }
}

/// Absolute positions from the momentum and relative coordinates, solving
/// `sum G_k z_k = Z`, `z_b - z_j = xi_j`.
pub fn from_relative(rel: &RelativeState) -> Result<SystemState> {
    let total = rel.total_intensity();
    let scale: f64 = rel.intensities.iter().map(|g| g.value().norm()).sum();
    if total.norm() <= 1e-14 * scale {
        return Err(Error::UndefinedCenter);
    }
    let others = rel.others();
    let weighted: Complex64 = others
        .iter()
        .zip(&rel.xi)
        .map(|(&k, &xi)| rel.intensities[k].value() * xi)
        .sum();
    let base = (rel.momentum + weighted) / total;
    Ok(assemble(rel, base))
}

/// Reconstruction for zero total intensity, anchored at a known base
/// position.
pub fn from_relative_anchored(rel: &RelativeState, base_position: Complex64) -> SystemState {
    assemble(rel, base_position)
}

/// Relative coordinate indices whose collisions get desingularized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlowupSelection(Vec<usize>);

impl BlowupSelection {
    pub fn new(mut indices: Vec<usize>, coordinates: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::InvalidSelection("selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= coordinates) {
            return Err(Error::InvalidSelection(format!(
                "coordinate {bad} out of range for {coordinates} relative coordinates"
            )));
        }
        Ok(Self(indices))
    }

    /// Select the collision between `particle` and the base particle.
    pub fn for_particles(rel: &RelativeState, particles: &[usize]) -> Result<Self> {
        let idx = particles
            .iter()
            .map(|&p| {
                rel.coordinate_of(p).ok_or_else(|| {
                    Error::InvalidSelection(format!("particle {p} is the base or out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(idx, rel.xi.len())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

/// The relative field with every `1/conj(xi_j)` and `1/conj(xi_l - xi_i)`
/// multiplied by `factor`, except that selected `1/conj(xi_j)` terms use the
/// supplied cancelled form.
fn rescaled_field(
    xi: &[Complex64],
    g: &[Complex64],
    ids: (&[usize], usize),
    inverse: &dyn Fn(usize) -> Result<Complex64>,
    factor: f64,
    strict_pairs: bool,
) -> Result<Vec<Complex64>> {
    let m = xi.len();
    let g_base = g[m];
    let inv: Vec<Complex64> = (0..m).map(inverse).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = -(g[i] + g_base) * inv[i];
        for l in 0..m {
            if l == i {
                continue;
            }
            let d = xi[l] - xi[i];
            let r2 = d.norm_sqr();
            if r2 < MIN_SEPARATION * MIN_SEPARATION {
                let (a, b) = (ids.0[i.min(l)], ids.0[i.max(l)]);
                return Err(if strict_pairs {
                    Error::Coincident {
                        first: a,
                        second: b,
                        separation: r2.sqrt(),
                    }
                } else {
                    Error::UnselectedCoincidence { first: a, second: b }
                });
            }
            v -= g[l] * (inv[l] - factor * d / r2);
        }
        out.push(v);
    }
    Ok(out)
}

fn plain_inverse<'a>(xi: &'a [Complex64], ids: &'a [usize], base_id: usize, factor: f64) -> impl Fn(usize) -> Result<Complex64> + 'a {
    move |j| {
        let r2 = xi[j].norm_sqr();
        if r2 < MIN_SEPARATION * MIN_SEPARATION {
            return Err(Error::Coincident {
                first: ids[j].min(base_id),
                second: ids[j].max(base_id),
                separation: r2.sqrt(),
            });
        }
        Ok(factor * xi[j] / r2)
    }
}

fn chart_ids(rel: &RelativeState) -> (Vec<usize>, usize) {
    (rel.others().iter().map(|&k| rel.ids[k]).collect(), rel.ids[rel.base])
}

fn check_xi(rel: &RelativeState) -> Result<()> {
    if rel.xi.len() + 1 != rel.len() {
        return Err(Error::LengthMismatch {
            expected: rel.len() - 1,
            found: rel.xi.len(),
        });
    }
    Ok(())
}

/// `d xi_i / dt = dz_b/dt - dz_i/dt`.
pub fn relative_field(rel: &RelativeState) -> Result<Vec<Complex64>> {
    check_xi(rel)?;
    let g = rel.chart_intensities();
    let (ids, base_id) = chart_ids(rel);
    let inverse = plain_inverse(&rel.xi, &ids, base_id, 1.0);
    rescaled_field(&rel.xi, &g, (&ids, base_id), &inverse, 1.0, true)
}

/// `prod_{j in sel} |xi_j|^2`.
pub fn time_scale(xi: &[Complex64], sel: &BlowupSelection) -> f64 {
    sel.indices().iter().map(|&j| xi[j].norm_sqr()).product()
}

/// `d xi / ds = (prod_{j in sel} |xi_j|^2) d xi / dt`, finite at the selected
/// collisions.
pub fn blowup_field(rel: &RelativeState, sel: &BlowupSelection) -> Result<Vec<Complex64>> {
    check_xi(rel)?;
    if let Some(&bad) = sel.indices().iter().find(|&&j| j >= rel.xi.len()) {
        return Err(Error::InvalidSelection(format!("coordinate {bad} out of range")));
    }
    let g = rel.chart_intensities();
    let (ids, base_id) = chart_ids(rel);
    let xi = &rel.xi;
    let factor = time_scale(xi, sel);
    let plain = plain_inverse(xi, &ids, base_id, factor);
    let inverse = |j: usize| -> Result<Complex64> {
        if sel.contains(j) {
            let rest: f64 = sel
                .indices()
                .iter()
                .filter(|&&m| m != j)
                .map(|&m| xi[m].norm_sqr())
                .product();
            Ok(xi[j] * rest)
        } else {
            plain(j)
        }
    };
    rescaled_field(xi, &g, (&ids, base_id), &inverse, factor, false)
}

/// Samples of a blow-up run. Each sample carries both `s` and the recovered
/// physical time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupTrajectory {
    pub samples: Vec<RelativeState>,
    /// Set when the controller hit the step floor before `s_end`.
    pub stalled_at_step: Option<f64>,
}

/// Integrate the blown-up system in `s`, carrying `t` along as an extra
/// component with `dt/ds = prod |xi_j|^2`.
pub fn integrate_blowup(
    rel: &RelativeState,
    sel: &BlowupSelection,
    s_end: f64,
    opts: &IntegratorOptions,
) -> Result<BlowupTrajectory> {
    opts.validate()?;
    check_xi(rel)?;
    if s_end == rel.s || !s_end.is_finite() {
        return Err(Error::InvalidOptions(format!("s_end {s_end} must differ from s = {}", rel.s)));
    }
    let m = rel.xi.len();
    let template = rel.clone();
    let unpack = |y: &[f64]| -> Vec<Complex64> {
        y[..2 * m].chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
    };
    let field = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let probe = RelativeState {
            xi: unpack(y),
            ..template.clone()
        };
        let v = blowup_field(&probe, sel)?;
        for (out, v) in dy.chunks_exact_mut(2).zip(&v) {
            out[0] = v.re;
            out[1] = v.im;
        }
        dy[2 * m] = time_scale(&probe.xi, sel);
        Ok(())
    };
    let mut y0: Vec<f64> = rel.xi.iter().flat_map(|z| [z.re, z.im]).collect();
    y0.push(rel.t);

    let at = |s: f64, y: &[f64]| RelativeState {
        xi: unpack(y),
        s,
        t: y[2 * m],
        ..template.clone()
    };
    let mut samples = vec![rel.clone()];
    let outcome = dopri::drive(&field, rel.s, &y0, s_end, &opts.control(), |_, _, s_new, y_new| {
        samples.push(at(s_new, y_new));
        Ok(Verdict::Continue)
    })?;
    let stalled_at_step = match outcome.finish {
        Finish::StepFloor { step } => Some(step),
        _ => None,
    };
    Ok(BlowupTrajectory {
        samples,
        stalled_at_step,
    })
}

/// Point of the collinear two-body motion in the `τ` chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub z: f64,
    pub t: f64,
}

/// Collinear two-body motion under `dt/dτ = z`, for which `dz/dτ = -Γ`.
///
/// `t` is measured so that `t = 0` at `τ = 0`:
/// `t(τ) = Γ/2 (τ0 + z0/Γ)^2 - Γ/2 (τ - τ0 - z0/Γ)^2`.
pub fn tau_regularize_two_body(gamma_sum: f64, z0: f64, tau0: f64, tau: f64) -> Result<TauPoint> {
    if gamma_sum == 0.0 || !gamma_sum.is_finite() {
        return Err(Error::ZeroIntensity);
    }
    let vertex = tau0 + z0 / gamma_sum;
    let z = -gamma_sum * (tau - tau0) + z0;
    let t = 0.5 * gamma_sum * (vertex * vertex - (tau - vertex) * (tau - vertex));
    Ok(TauPoint { z, t })
}

/// `(τ, t)` at which the collinear pair collides.
pub fn tau_collision(gamma_sum: f64, z0: f64, tau0: f64) -> Result<(f64, f64)> {
    if gamma_sum == 0.0 || !gamma_sum.is_finite() {
        return Err(Error::ZeroIntensity);
    }
    let tau = tau0 + z0 / gamma_sum;
    Ok((tau, 0.5 * gamma_sum * tau * tau))
}
