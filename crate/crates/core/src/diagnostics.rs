//! Executable checks of the first integrals and structural identities over
//! states and trajectories.
//!
//! Along a pure-source trajectory with weights equal to the intensities:
//! `Z` is conserved, the angular momentum `A` vanishes identically, the moment
//! of inertia drifts linearly with slope `-2 * virial`, and the winding
//! functional `g = -sum w_k w_l θ_kl` is locally constant. The winding probe
//! also measures whether every pair angle stays within one turn of its start;
//! that is an open claim and a violation is reported, never treated as a bug.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{EventKind, Trajectory};
use crate::model::{
    self, angular_momentum, angular_momentum_scale, complex_virial, hamiltonian, linear_momentum,
    moment_of_inertia, source_potential, velocity_field, virial, SystemState, WeightVector,
};

/// Central finite-difference step used by [`gradient_check`].
pub const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Every intensity is real.
    Source,
    NonSource,
}

/// Least-squares line through `I(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation from the fitted line.
    pub residual: f64,
    /// `-2 * virial` of the weights.
    pub predicted_slope: f64,
    /// Largest `|I(t) - I(t0)|`.
    pub max_deviation: f64,
    pub strictly_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWinding {
    /// Particle ids.
    pub first: usize,
    pub second: usize,
    /// Signed largest excursion of the unwrapped angle from its start.
    pub delta: f64,
    /// Net change between the first and last sample.
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub pairs: Vec<PairWinding>,
    /// `max |g(t) - g(t0)|`.
    pub g_drift: f64,
}

impl WindingReport {
    pub fn within_one_turn(&self) -> bool {
        self.pairs.iter().all(|p| p.delta.abs() < TAU)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub scope: Scope,
    pub z_drift: f64,
    pub max_abs_a: f64,
    /// `|A|` relative to `sum |w| |z| |v|`, maximized over samples.
    pub max_rel_a: f64,
    /// Only for pure-source spans.
    pub inertia: Option<InertiaFit>,
    pub virial: f64,
    pub complex_virial: Complex64,
    /// `H` with the circulations `-Im G` as weights.
    pub h_start: Option<f64>,
    pub h_end: Option<f64>,
    /// Source potential with `Re G` as weights.
    pub g_start: Option<f64>,
    pub g_end: Option<f64>,
    pub winding: WindingReport,
    pub conjecture_holds: bool,
}

/// Report over a trajectory without merge events.
pub fn invariant_drift_report(traj: &Trajectory, weights: &WeightVector) -> Result<InvariantReport> {
    if let Some(merge) = traj.events_of(EventKind::Merge).next() {
        return Err(Error::EventsInSpan(merge.time));
    }
    let samples: Vec<SystemState> = traj.samples().cloned().collect();
    report_samples(&samples, weights)
}

fn check_samples(samples: &[SystemState], weights: &WeightVector) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: samples.len(),
        });
    }
    let ids = samples[0].ids();
    for s in samples {
        if s.ids() != ids {
            return Err(Error::EventsInSpan(s.time));
        }
    }
    if weights.len() != ids.len() {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            found: weights.len(),
        });
    }
    Ok(())
}

/// Report over a run of samples sharing one particle set.
pub fn report_samples(samples: &[SystemState], weights: &WeightVector) -> Result<InvariantReport> {
    check_samples(samples, weights)?;
    let first = &samples[0];
    let last = &samples[samples.len() - 1];
    let scope = if first.is_pure_source() {
        Scope::Source
    } else {
        Scope::NonSource
    };

    let z0 = linear_momentum(first);
    let mut z_drift = 0.0f64;
    let mut max_abs_a = 0.0f64;
    let mut max_rel_a = 0.0f64;
    for s in samples {
        z_drift = z_drift.max((linear_momentum(s) - z0).norm());
        let z = s.positions();
        let v = velocity_field(s)?;
        let a = angular_momentum(&z, &v, weights)?;
        let scale = angular_momentum_scale(&z, &v, weights);
        max_abs_a = max_abs_a.max(a.abs());
        if scale > 0.0 {
            max_rel_a = max_rel_a.max(a.abs() / scale);
        }
    }

    let inertia = match scope {
        Scope::Source => Some(inertia_fit(samples, weights)?),
        Scope::NonSource => None,
    };
    let (h_start, h_end, g_start, g_end) = if first.len() >= 2 {
        let vw = WeightVector::vortex_weights(first);
        let sw = WeightVector::source_weights(first);
        (
            Some(hamiltonian(first, &vw)?),
            Some(hamiltonian(last, &vw)?),
            Some(source_potential(first, &sw)?),
            Some(source_potential(last, &sw)?),
        )
    } else {
        (None, None, None, None)
    };
    let winding = winding_probe(samples, weights)?;
    let conjecture_holds = winding.within_one_turn();
    Ok(InvariantReport {
        t_start: first.time,
        t_end: last.time,
        samples: samples.len(),
        scope,
        z_drift,
        max_abs_a,
        max_rel_a,
        inertia,
        virial: virial(weights),
        complex_virial: complex_virial(&first.intensities()),
        h_start,
        h_end,
        g_start,
        g_end,
        winding,
        conjecture_holds,
    })
}

/// Least-squares fit of `I(t)` plus the monotonicity verdict.
pub fn inertia_fit(samples: &[SystemState], weights: &WeightVector) -> Result<InertiaFit> {
    check_samples(samples, weights)?;
    let t: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let inertia = samples
        .iter()
        .map(|s| moment_of_inertia(s, weights))
        .collect::<Result<Vec<_>>>()?;
    let n = t.len() as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let i_mean = inertia.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&ti, &ii) in t.iter().zip(&inertia) {
        sxy += (ti - t_mean) * (ii - i_mean);
        sxx += (ti - t_mean) * (ti - t_mean);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = i_mean - slope * t_mean;
    let residual = t
        .iter()
        .zip(&inertia)
        .map(|(&ti, &ii)| (ii - (intercept + slope * ti)).abs())
        .fold(0.0, f64::max);
    let max_deviation = inertia.iter().map(|i| (i - inertia[0]).abs()).fold(0.0, f64::max);
    let increasing = inertia.windows(2).all(|w| w[1] > w[0]);
    let decreasing = inertia.windows(2).all(|w| w[1] < w[0]);
    // Samples are in integration order; a backward run flips the sign.
    Ok(InertiaFit {
        slope,
        intercept,
        residual,
        predicted_slope: -2.0 * virial(weights),
        max_deviation,
        strictly_monotone: increasing || decreasing,
    })
}

fn wrap(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(TAU) - PI;
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Unwrapped pair angles `arg(z_k - z_l)`, `k < l`, and the drift of the
/// functional `g = -sum w_k w_l θ_kl`.
pub fn winding_probe(samples: &[SystemState], weights: &WeightVector) -> Result<WindingReport> {
    check_samples(samples, weights)?;
    let n = samples[0].len();
    let w = weights.as_slice();
    let ids = samples[0].ids();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| ((k + 1)..n).map(move |l| (k, l))).collect();

    let angle = |s: &SystemState, k: usize, l: usize| (s.particles[k].position - s.particles[l].position).arg();
    let mut raw: Vec<f64> = pairs.iter().map(|&(k, l)| angle(&samples[0], k, l)).collect();
    let mut unwrapped = vec![0.0f64; pairs.len()];
    let mut excursion = vec![0.0f64; pairs.len()];
    let mut g_drift = 0.0f64;

    for s in &samples[1..] {
        for (p, &(k, l)) in pairs.iter().enumerate() {
            let now = angle(s, k, l);
            let jump = wrap(now - raw[p]);
            if jump.abs() > FRAC_PI_2 {
                return Err(Error::CoarseSampling {
                    first: ids[k],
                    second: ids[l],
                    time: s.time,
                    jump,
                });
            }
            raw[p] = now;
            unwrapped[p] += jump;
            if unwrapped[p].abs() > excursion[p].abs() {
                excursion[p] = unwrapped[p];
            }
        }
        let g: f64 = pairs
            .iter()
            .zip(&unwrapped)
            .map(|(&(k, l), d)| -w[k] * w[l] * d)
            .sum();
        g_drift = g_drift.max(g.abs());
    }
    Ok(WindingReport {
        pairs: pairs
            .iter()
            .enumerate()
            .map(|(p, &(k, l))| PairWinding {
                first: ids[k],
                second: ids[l],
                delta: excursion[p],
                net: unwrapped[p],
            })
            .collect(),
        g_drift,
    })
}

type Potential = fn(&SystemState, &WeightVector) -> Result<f64>;

fn fd_gradient(state: &SystemState, weights: &WeightVector, potential: Potential) -> Result<Vec<Complex64>> {
    let h = GRADIENT_STEP;
    let mut probe = state.clone();
    let mut grad = Vec::with_capacity(state.len());
    for k in 0..state.len() {
        let mut comp = [0.0; 2];
        for (c, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
            let origin = state.particles[k].position;
            probe.particles[k].position = origin + dir * h;
            let plus = potential(&probe, weights)?;
            probe.particles[k].position = origin - dir * h;
            let minus = potential(&probe, weights)?;
            probe.particles[k].position = origin;
            comp[c] = (plus - minus) / (2.0 * h);
        }
        grad.push(Complex64::new(comp[0], comp[1]));
    }
    Ok(grad)
}

fn compare(weighted: &[Complex64], grad: &[Complex64]) -> f64 {
    let scale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let worst = weighted
        .iter()
        .zip(grad)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Largest deviation of `w_k v_k` from the finite-difference gradient of `H`
/// (weights `w`), relative to the largest gradient component. Meaningful for
/// pure-source states with `w = G`.
pub fn gradient_check(state: &SystemState, weights: &WeightVector) -> Result<f64> {
    let v = velocity_field(state)?;
    check_weighted(state, &v, weights)
}

/// Same check for the source part of a mixed state: the full field minus its
/// rotational part, against the source potential with `Re G` weights.
pub fn source_gradient_check(state: &SystemState) -> Result<f64> {
    let full = velocity_field(state)?;
    let parts = model::decompose_field(state)?;
    let source: Vec<Complex64> = full.iter().zip(&parts.vortex).map(|(a, b)| a - b).collect();
    let weights = WeightVector::source_weights(state);
    let grad = fd_gradient(state, &weights, source_potential)?;
    let weighted: Vec<Complex64> = source.iter().zip(weights.as_slice()).map(|(v, w)| v * *w).collect();
    Ok(compare(&weighted, &grad))
}

fn check_weighted(state: &SystemState, v: &[Complex64], weights: &WeightVector) -> Result<f64> {
    if weights.len() != state.len() {
        return Err(Error::LengthMismatch {
            expected: state.len(),
            found: weights.len(),
        });
    }
    let grad = fd_gradient(state, weights, hamiltonian)?;
    let weighted: Vec<Complex64> = v.iter().zip(weights.as_slice()).map(|(v, w)| v * *w).collect();
    Ok(compare(&weighted, &grad))
}
