//! Dormand–Prince 5(4) embedded pair with a step-size controller shared by
//! the physical-time integrator and the blow-up chart.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Fallible right-hand side `dy/dt = f(t, y)`.
pub trait VectorField {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

/// Result of one trial step: the 5th order solution and the error vector.
pub struct Trial {
    pub y: Vec<f64>,
    pub err: Vec<f64>,
}

fn combine(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

pub fn trial_step<F: VectorField>(f: &F, t: f64, y: &[f64], h: f64) -> Result<Trial> {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f.eval(t, y, &mut k1)?;
    combine(y, h, &[(A21, &k1)], &mut tmp);
    f.eval(t + C2 * h, &tmp, &mut k2)?;
    combine(y, h, &[(A31, &k1), (A32, &k2)], &mut tmp);
    f.eval(t + C3 * h, &tmp, &mut k3)?;
    combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut tmp);
    f.eval(t + C4 * h, &tmp, &mut k4)?;
    combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut tmp);
    f.eval(t + C5 * h, &tmp, &mut k5)?;
    combine(
        y,
        h,
        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        &mut tmp,
    );
    f.eval(t + h, &tmp, &mut k6)?;
    let mut y_new = vec![0.0; n];
    combine(
        y,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        &mut y_new,
    );
    f.eval(t + h, &y_new, &mut k7)?;

    let err = (0..n)
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    Ok(Trial { y: y_new, err })
}

/// Max-norm of the error scaled by `atol + rtol * max(|y|, |y_new|)`.
pub fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], atol: f64, rtol: f64) -> f64 {
    err.iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct Control {
    pub initial_step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub step_floor: f64,
    pub max_steps: usize,
}

/// What the acceptance hook wants done with a step that passed error control.
pub enum Verdict {
    Continue,
    Stop,
    /// Retry with a smaller step.
    Retry,
}

pub enum Finish {
    Reached,
    Stopped,
    StepFloor { step: f64 },
}

pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub finish: Finish,
    pub steps: usize,
}

/// Advance from `(t0, y0)` toward `t_end`. `on_accept(t, y, t_new, y_new)` is
/// called for every step that passes error control.
pub fn drive<F, H>(f: &F, t0: f64, y0: &[f64], t_end: f64, ctl: &Control, mut on_accept: H) -> Result<Outcome>
where
    F: VectorField,
    H: FnMut(f64, &[f64], f64, &[f64]) -> Result<Verdict>,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = ctl.initial_step.abs();
    let mut steps = 0usize;
    let mut attempts = 0usize;

    while dir * (t_end - t) > 0.0 {
        if h < ctl.step_floor {
            return Ok(Outcome {
                t,
                y,
                finish: Finish::StepFloor { step: h },
                steps,
            });
        }
        attempts += 1;
        if attempts > ctl.max_steps.saturating_mul(4) || steps >= ctl.max_steps {
            return Err(Error::MaxStepsExceeded(ctl.max_steps, t));
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let t_new = if last { t_end } else { t + dir * step };

        let trial = match trial_step(f, t, &y, dir * step) {
            Ok(trial) => trial,
            Err(Error::Coincident { .. }) => {
                h = step * 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let norm = error_norm(&trial.err, &y, &trial.y, ctl.abs_tol, ctl.rel_tol);
        if !norm.is_finite() || norm > 1.0 {
            let factor = if norm.is_finite() {
                (SAFETY * norm.powf(-0.2)).max(MIN_FACTOR)
            } else {
                MIN_FACTOR
            };
            h = step * factor;
            continue;
        }
        match on_accept(t, &y, t_new, &trial.y)? {
            Verdict::Retry => {
                h = step * 0.5;
                continue;
            }
            Verdict::Stop => {
                return Ok(Outcome {
                    t: t_new,
                    y: trial.y,
                    finish: Finish::Stopped,
                    steps: steps + 1,
                })
            }
            Verdict::Continue => {}
        }
        steps += 1;
        t = t_new;
        y = trial.y;
        let factor = if norm == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        // Keep the pre-clip step as the base so a short final step does not
        // poison the next proposal.
        h = if last { h.max(step * factor) } else { step * factor };
    }
    Ok(Outcome {
        t,
        y,
        finish: Finish::Reached,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> Control {
        Control {
            initial_step: 0.1,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            step_floor: 1e-14,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = -y[0];
            Ok(())
        };
        let out = drive(&f, 0.0, &[1.0], 2.0, &ctl(), |_, _, _, _| Ok(Verdict::Continue)).unwrap();
        assert!((out.y[0] - (-2.0f64).exp()).abs() < 1e-11);
        assert_eq!(out.t, 2.0);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let out = drive(&f, 0.0, &[1.0, 0.0], -3.0, &ctl(), |_, _, _, _| Ok(Verdict::Continue)).unwrap();
        assert!((out.y[0] - 3f64.cos()).abs() < 1e-10);
        assert!((out.y[1] - 3f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn fifth_order_convergence() {
        // One fixed step on y' = y: the local error shrinks like h^6.
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[0];
            Ok(())
        };
        let e1 = (trial_step(&f, 0.0, &[1.0], 0.2).unwrap().y[0] - 0.2f64.exp()).abs();
        let e2 = (trial_step(&f, 0.0, &[1.0], 0.1).unwrap().y[0] - 0.1f64.exp()).abs();
        let order = (e1 / e2).log2();
        assert!(order > 5.5 && order < 6.5, "observed {order}");
    }
}
