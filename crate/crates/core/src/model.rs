//! Particle system and the interaction field.
//!
//! Intensities use a single canonical convention: every particle moves with
//!
//! ```text
//! dz_k/dt = -sum_{l != k} G_l (z_k - z_l) / |z_k - z_l|^2 = -sum_{l != k} G_l / conj(z_k - z_l)
//! ```
//!
//! A real positive `G` is a sink (the flux `-G` is negative), a purely
//! imaginary `G = -i w` is a point vortex of circulation `w`. The field written
//! with a leading factor `i` and "complex vorticities" `V` maps onto this one
//! through `G = -i V`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Separations below this are treated as coincident positions.
pub const MIN_SEPARATION: f64 = 1e-13;

/// Particle count from which the field evaluation fans out over threads.
const PARALLEL_FIELD_THRESHOLD: usize = 256;

/// Nonzero complex intensity in the canonical convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex64", into = "Complex64")]
pub struct Intensity(Complex64);

impl Intensity {
    pub fn new(value: Complex64) -> Result<Self> {
        if value.re == 0.0 && value.im == 0.0 || !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::ZeroIntensity);
        }
        Ok(Self(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        Self::new(Complex64::new(value, 0.0))
    }

    /// A pure source of outflow strength `q` (`q < 0` is a sink).
    pub fn from_source_strength(q: f64) -> Result<Self> {
        Self::new(Complex64::new(-q, 0.0))
    }

    /// A pure vortex of circulation `w` (counter-clockwise for `w > 0`).
    pub fn from_vorticity(w: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, -w))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Outflow strength of the source component, `-Re G`.
    pub fn source_strength(self) -> f64 {
        -self.0.re
    }

    /// Circulation of the vortex component, `-Im G`.
    pub fn vorticity(self) -> f64 {
        -self.0.im
    }

    pub fn is_pure_source(self) -> bool {
        self.0.im == 0.0
    }
}

impl TryFrom<Complex64> for Intensity {
    type Error = Error;

    fn try_from(value: Complex64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Intensity> for Complex64 {
    fn from(value: Intensity) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// Stable label; merged particles receive a fresh id.
    pub id: usize,
    pub position: Complex64,
    pub intensity: Intensity,
}

impl Particle {
    pub fn new(id: usize, position: Complex64, intensity: Intensity) -> Self {
        Self {
            id,
            position,
            intensity,
        }
    }
}

/// Time plus an ordered list of particles at pairwise distinct positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub time: f64,
    pub particles: Vec<Particle>,
}

impl SystemState {
    pub fn new(time: f64, particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::TooFewParticles {
                needed: 1,
                found: 0,
            });
        }
        let state = Self { time, particles };
        if let Some((a, b, sep)) = state.closest_pair() {
            if sep < MIN_SEPARATION {
                return Err(Error::Coincident {
                    first: state.particles[a].id,
                    second: state.particles[b].id,
                    separation: sep,
                });
            }
        }
        Ok(state)
    }

    /// Build a state from `(position, intensity)` pairs, labelled `0..N`.
    pub fn from_parts(time: f64, parts: &[(Complex64, Complex64)]) -> Result<Self> {
        let particles = parts
            .iter()
            .enumerate()
            .map(|(id, &(z, g))| Intensity::new(g).map(|g| Particle::new(id, z, g)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(time, particles)
    }

    /// Pure real intensities at the given positions.
    pub fn from_real(time: f64, positions: &[Complex64], gammas: &[f64]) -> Result<Self> {
        if positions.len() != gammas.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                found: gammas.len(),
            });
        }
        let parts: Vec<_> = positions
            .iter()
            .zip(gammas)
            .map(|(&z, &g)| (z, Complex64::new(g, 0.0)))
            .collect();
        Self::from_parts(time, &parts)
    }

    pub(crate) fn from_raw(time: f64, template: &[Particle], positions: &[Complex64]) -> Self {
        let particles = template
            .iter()
            .zip(positions)
            .map(|(p, &z)| Particle { position: z, ..*p })
            .collect();
        Self { time, particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> Vec<Complex64> {
        self.particles.iter().map(|p| p.position).collect()
    }

    pub fn intensities(&self) -> Vec<Complex64> {
        self.particles.iter().map(|p| p.intensity.value()).collect()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.particles.iter().map(|p| p.id).collect()
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.particles.iter().position(|p| p.id == id)
    }

    pub fn total_intensity(&self) -> Complex64 {
        self.particles.iter().map(|p| p.intensity.value()).sum()
    }

    pub fn is_pure_source(&self) -> bool {
        self.particles.iter().all(|p| p.intensity.is_pure_source())
    }

    /// Indices and separation of the closest pair, if `N >= 2`.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        closest_pair(&self.positions())
    }

    /// Copy of the state with every position shifted by `w`.
    pub fn translated(&self, w: Complex64) -> Self {
        let mut out = self.clone();
        for p in &mut out.particles {
            p.position += w;
        }
        out
    }
}

pub(crate) fn closest_pair(z: &[Complex64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for k in 0..z.len() {
        for l in (k + 1)..z.len() {
            let d = (z[k] - z[l]).norm();
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((k, l, d));
            }
        }
    }
    best
}

/// Real per-particle weights used by the scalar invariants (`A`, `I`, virial,
/// `H`, `G`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    /// `Re G_k`: the source weights. For a pure-source state these are the
    /// intensities themselves.
    pub fn source_weights(state: &SystemState) -> Self {
        Self(state.particles.iter().map(|p| p.intensity.value().re).collect())
    }

    /// `-Im G_k`: the circulations.
    pub fn vortex_weights(state: &SystemState) -> Self {
        Self(state.particles.iter().map(|p| p.intensity.vorticity()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

fn velocity_of(k: usize, positions: &[Complex64], intensities: &[Complex64]) -> Result<Complex64> {
    let zk = positions[k];
    let mut v = Complex64::new(0.0, 0.0);
    for (l, (&zl, &gl)) in positions.iter().zip(intensities).enumerate() {
        if l == k {
            continue;
        }
        let d = zk - zl;
        let r2 = d.norm_sqr();
        if r2 < MIN_SEPARATION * MIN_SEPARATION {
            return Err(Error::Coincident {
                first: k.min(l),
                second: k.max(l),
                separation: r2.sqrt(),
            });
        }
        v -= gl * d / r2;
    }
    Ok(v)
}

/// Field evaluation on raw slices. Coincidence errors carry slice indices.
pub fn field(positions: &[Complex64], intensities: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = positions.len();
    if intensities.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: intensities.len(),
        });
    }
    if n >= PARALLEL_FIELD_THRESHOLD {
        par::map_range(n, |k| velocity_of(k, positions, intensities))
            .into_iter()
            .collect()
    } else {
        (0..n).map(|k| velocity_of(k, positions, intensities)).collect()
    }
}

/// Sequential field evaluation regardless of `N` or features.
pub fn field_sequential(positions: &[Complex64], intensities: &[Complex64]) -> Result<Vec<Complex64>> {
    (0..positions.len())
        .map(|k| velocity_of(k, positions, intensities))
        .collect()
}

fn relabel(err: Error, state: &SystemState) -> Error {
    match err {
        Error::Coincident {
            first,
            second,
            separation,
        } => Error::Coincident {
            first: state.particles[first].id,
            second: state.particles[second].id,
            separation,
        },
        other => other,
    }
}

/// Velocity of every particle. `N = 1` yields a zero velocity.
pub fn velocity_field(state: &SystemState) -> Result<Vec<Complex64>> {
    field(&state.positions(), &state.intensities()).map_err(|e| relabel(e, state))
}

fn log_pair_sum(state: &SystemState, weights: &WeightVector) -> Result<f64> {
    if state.len() < 2 {
        return Err(Error::TooFewParticles {
            needed: 2,
            found: state.len(),
        });
    }
    weights.check(state.len())?;
    let w = weights.as_slice();
    let mut sum = 0.0;
    for k in 0..state.len() {
        for l in (k + 1)..state.len() {
            let r = (state.particles[k].position - state.particles[l].position).norm();
            if r < MIN_SEPARATION {
                return Err(Error::Coincident {
                    first: state.particles[k].id,
                    second: state.particles[l].id,
                    separation: r,
                });
            }
            sum -= w[k] * w[l] * r.ln();
        }
    }
    Ok(sum)
}

/// `H = -sum_{k<l} w_k w_l ln|z_k - z_l|` with the supplied weights.
pub fn hamiltonian(state: &SystemState, vorticities: &WeightVector) -> Result<f64> {
    log_pair_sum(state, vorticities)
}

/// Same functional form as [`hamiltonian`], evaluated with source weights; the
/// source part of the field is its gradient.
pub fn source_potential(state: &SystemState, sources: &WeightVector) -> Result<f64> {
    log_pair_sum(state, sources)
}

/// `Z = sum G_k z_k` with the full complex intensities.
pub fn linear_momentum(state: &SystemState) -> Complex64 {
    state
        .particles
        .iter()
        .map(|p| p.intensity.value() * p.position)
        .sum()
}

/// `z_0 = Z / sum G_k`.
pub fn equivalent_center(state: &SystemState) -> Result<Complex64> {
    let total = state.total_intensity();
    if total.norm() == 0.0 {
        return Err(Error::UndefinedCenter);
    }
    Ok(linear_momentum(state) / total)
}

/// `A = sum w_k (i z_k) . v_k` with `.` the planar dot product.
pub fn angular_momentum(
    positions: &[Complex64],
    velocities: &[Complex64],
    weights: &WeightVector,
) -> Result<f64> {
    if velocities.len() != positions.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            found: velocities.len(),
        });
    }
    weights.check(positions.len())?;
    Ok(positions
        .iter()
        .zip(velocities)
        .zip(weights.as_slice())
        .map(|((&z, &v), &w)| w * dot(Complex64::i() * z, v))
        .sum())
}

/// `sum |w_k| |z_k| |v_k|`, the natural scale for [`angular_momentum`].
pub fn angular_momentum_scale(
    positions: &[Complex64],
    velocities: &[Complex64],
    weights: &WeightVector,
) -> f64 {
    positions
        .iter()
        .zip(velocities)
        .zip(weights.as_slice())
        .map(|((z, v), w)| w.abs() * z.norm() * v.norm())
        .sum()
}

pub(crate) fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// `I = sum w_k |z_k|^2`.
pub fn moment_of_inertia(state: &SystemState, weights: &WeightVector) -> Result<f64> {
    weights.check(state.len())?;
    Ok(state
        .particles
        .iter()
        .zip(weights.as_slice())
        .map(|(p, &w)| w * p.position.norm_sqr())
        .sum())
}

/// `sum_{k<l} w_k w_l`.
pub fn virial(weights: &WeightVector) -> f64 {
    let w = weights.as_slice();
    let mut sum = 0.0;
    for k in 0..w.len() {
        for l in (k + 1)..w.len() {
            sum += w[k] * w[l];
        }
    }
    sum
}

/// Virial of the full complex intensities.
pub fn complex_virial(intensities: &[Complex64]) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..intensities.len() {
        for l in (k + 1)..intensities.len() {
            sum += intensities[k] * intensities[l];
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldParts {
    /// Rotational part, generated by intensities `i Im G_k`.
    pub vortex: Vec<Complex64>,
    /// Radial part, generated by intensities `Re G_k`.
    pub source: Vec<Complex64>,
}

pub fn decompose_field(state: &SystemState) -> Result<FieldParts> {
    let z = state.positions();
    let g = state.intensities();
    let vortex_g: Vec<_> = g.iter().map(|g| Complex64::new(0.0, g.im)).collect();
    let source_g: Vec<_> = g.iter().map(|g| Complex64::new(g.re, 0.0)).collect();
    let vortex = field(&z, &vortex_g).map_err(|e| relabel(e, state))?;
    let source = field(&z, &source_g).map_err(|e| relabel(e, state))?;
    Ok(FieldParts { vortex, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair(g1: Complex64, g2: Complex64, z1: Complex64, z2: Complex64) -> SystemState {
        SystemState::from_parts(0.0, &[(z1, g1), (z2, g2)]).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) {
        assert!((a - b).norm() <= tol, "{a} vs {b}");
    }

    #[test]
    fn sink_pair_approaches() {
        let s = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let v = velocity_field(&s).unwrap();
        close(v[0], c(1.0, 0.0), 1e-15);
        close(v[1], c(-1.0, 0.0), 1e-15);
    }

    #[test]
    fn vortex_pair_rotates_rigidly() {
        // G = -i is a unit counter-clockwise vortex; z_1 at the origin is
        // pushed down by its partner at +1.
        let s = pair(c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0), c(1.0, 0.0));
        let v = velocity_field(&s).unwrap();
        close(v[0], c(0.0, -1.0), 1e-15);
        close(v[1], c(0.0, 1.0), 1e-15);
    }

    #[test]
    fn mixed_pair_velocity() {
        let s = pair(c(1.0, 1.0), c(1.0, 1.0), c(0.0, 0.0), c(1.0, 0.0));
        let v = velocity_field(&s).unwrap();
        close(v[0], c(1.0, 1.0), 1e-15);
        close(v[1], c(-1.0, -1.0), 1e-15);
    }

    #[test]
    fn single_particle_is_static() {
        let s = SystemState::from_real(0.0, &[c(0.3, 0.2)], &[2.0]).unwrap();
        assert_eq!(velocity_field(&s).unwrap(), vec![c(0.0, 0.0)]);
    }

    #[test]
    fn coincident_positions_are_rejected() {
        let err = SystemState::from_real(0.0, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)], &[1.0; 3])
            .unwrap_err();
        assert!(matches!(err, Error::Coincident { first: 1, second: 2, .. }));
        let raw = field(&[c(0.0, 0.0), c(1e-14, 0.0)], &[c(1.0, 0.0); 2]).unwrap_err();
        assert!(matches!(raw, Error::Coincident { first: 0, second: 1, .. }));
    }

    #[test]
    fn convention_constructors() {
        assert_eq!(Intensity::from_source_strength(2.0).unwrap().value(), c(-2.0, 0.0));
        assert_eq!(Intensity::from_vorticity(3.0).unwrap().value(), c(0.0, -3.0));
        assert_eq!(Intensity::from_vorticity(3.0).unwrap().vorticity(), 3.0);
        assert_eq!(Intensity::real(1.5).unwrap().source_strength(), -1.5);
        assert_eq!(Intensity::new(c(0.0, 0.0)), Err(Error::ZeroIntensity));
    }

    #[test]
    fn hamiltonian_values() {
        let w = WeightVector::new(vec![1.0, 1.0]);
        let unit = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(hamiltonian(&unit, &w).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let far = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(e, 0.0));
        assert_abs_diff_eq!(hamiltonian(&far, &w).unwrap(), -1.0, epsilon = 1e-15);
        let h = 3f64.sqrt() / 2.0;
        let tri = SystemState::from_real(0.0, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, h)], &[1.0; 3]).unwrap();
        assert_abs_diff_eq!(
            hamiltonian(&tri, &WeightVector::new(vec![1.0; 3])).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_eq!(source_potential(&unit, &WeightVector::new(vec![2.0, 3.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(source_potential(&far, &w).unwrap(), -1.0, epsilon = 1e-15);
        let single = SystemState::from_real(0.0, &[c(0.0, 0.0)], &[1.0]).unwrap();
        assert!(hamiltonian(&single, &WeightVector::new(vec![1.0])).is_err());
    }

    #[test]
    fn momentum_and_center() {
        let s = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(linear_momentum(&s), c(1.0, 0.0));
        assert_eq!(equivalent_center(&s).unwrap(), c(0.5, 0.0));
        let d = pair(c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(linear_momentum(&d), c(-1.0, 0.0));
        assert_eq!(equivalent_center(&d), Err(Error::UndefinedCenter));
        let three = SystemState::from_real(
            0.0,
            &[c(-0.5, 0.25), c(0.5, -0.75), c(0.5, 0.25)],
            &[2.0, 1.0, 1.0],
        )
        .unwrap();
        close(linear_momentum(&three), c(0.0, 0.0), 1e-15);
    }

    #[test]
    fn angular_momentum_single_particle() {
        let a = angular_momentum(&[c(1.0, 0.0)], &[c(0.0, 1.0)], &WeightVector::new(vec![1.0])).unwrap();
        assert_eq!(a, 1.0);
        assert!(angular_momentum(&[c(1.0, 0.0)], &[], &WeightVector::new(vec![1.0])).is_err());
    }

    #[test]
    fn angular_momentum_vanishes_for_three_sources() {
        let s = SystemState::from_real(
            0.0,
            &[c(0.1, 0.7), c(-0.4, 0.2), c(0.6, -0.3)],
            &[1.0, -2.0, 3.0],
        )
        .unwrap();
        let v = velocity_field(&s).unwrap();
        let w = WeightVector::source_weights(&s);
        let a = angular_momentum(&s.positions(), &v, &w).unwrap();
        let scale = angular_momentum_scale(&s.positions(), &v, &w);
        assert!(a.abs() <= 1e-12 * scale, "A = {a}");
    }

    #[test]
    fn inertia_values() {
        let s = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(moment_of_inertia(&s, &WeightVector::new(vec![1.0, 1.0])).unwrap(), 1.0);
        let r = 1.0 / 3f64.sqrt();
        let tri: Vec<_> = (0..3)
            .map(|k| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / 3.0))
            .collect();
        let t = SystemState::from_real(0.0, &tri, &[1.0; 3]).unwrap();
        assert_abs_diff_eq!(
            moment_of_inertia(&t, &WeightVector::new(vec![1.0; 3])).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let d = pair(c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        assert_eq!(moment_of_inertia(&d, &WeightVector::new(vec![1.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn virial_values() {
        assert_eq!(virial(&WeightVector::new(vec![1.0, 1.0, 1.0])), 3.0);
        assert_eq!(virial(&WeightVector::new(vec![1.0, -1.0])), -1.0);
        assert_eq!(complex_virial(&[c(1.0, 1.0), c(1.0, -1.0)]), c(2.0, 0.0));
    }

    #[test]
    fn decomposition_cases() {
        let real = pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let parts = decompose_field(&real).unwrap();
        assert_eq!(parts.source, velocity_field(&real).unwrap());
        assert!(parts.vortex.iter().all(|v| v.norm() == 0.0));

        let vort = pair(c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0), c(1.0, 0.0));
        let parts = decompose_field(&vort).unwrap();
        assert_eq!(parts.vortex, velocity_field(&vort).unwrap());
        assert!(parts.source.iter().all(|v| v.norm() == 0.0));

        let mixed = pair(c(1.0, 1.0), c(1.0, 1.0), c(0.0, 0.0), c(1.0, 0.0));
        let parts = decompose_field(&mixed).unwrap();
        close(parts.vortex[0] + parts.source[0], c(1.0, 1.0), 1e-15);
        close(parts.vortex[1] + parts.source[1], c(-1.0, -1.0), 1e-15);
    }

    #[test]
    fn hamiltonian_is_translation_invariant() {
        let s = SystemState::from_real(
            0.0,
            &[c(0.1, 0.7), c(-0.4, 0.2), c(0.6, -0.3), c(0.0, -0.8)],
            &[1.0, -2.0, 3.0, 0.5],
        )
        .unwrap();
        let w = WeightVector::source_weights(&s);
        let h0 = hamiltonian(&s, &w).unwrap();
        let h1 = hamiltonian(&s.translated(c(3.7, -12.25)), &w).unwrap();
        assert_abs_diff_eq!(h0, h1, epsilon = 1e-12);
    }
}
