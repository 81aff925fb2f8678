//! Physical-time integration with collision detection and the merge rule.

pub mod dopri;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, closest_pair, Intensity, Particle, SystemState};
use crate::par;
use dopri::{Control, Finish, Verdict};

/// Particles closer than this multiple of the collision radius at the event
/// time join the colliding cluster.
pub const CLUSTER_FACTOR: f64 = 2.0;

/// Relative accuracy of the bisected collision time, measured against the
/// bracketing step.
const CROSSING_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub initial_step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Pair separation that counts as a collision.
    pub collision_radius: f64,
    pub step_floor: f64,
    pub max_steps: usize,
    pub direction: Direction,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            collision_radius: 1e-6,
            step_floor: 1e-16,
            max_steps: 1_000_000,
            direction: Direction::Forward,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")))
            }
        };
        positive("initial_step", self.initial_step)?;
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        positive("collision_radius", self.collision_radius)?;
        positive("step_floor", self.step_floor)?;
        if self.step_floor >= self.initial_step {
            return Err(Error::InvalidOptions(format!(
                "step_floor {} must be below initial_step {}",
                self.step_floor, self.initial_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidOptions("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn control(&self) -> Control {
        Control {
            initial_step: self.initial_step,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            step_floor: self.step_floor,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Collision,
    Merge,
    Termination,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Collision => "collision",
            EventKind::Merge => "merge",
            EventKind::Termination => "termination",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// The controller wanted a step below the floor. Integration near this
    /// pair should continue in the blow-up chart.
    StepFloor {
        step: f64,
        closest_pair: Option<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    /// Particle ids.
    pub participants: Vec<usize>,
    pub location: Complex64,
    pub termination: Option<Termination>,
}

/// Samples split into segments; a merge starts a new segment whose first
/// sample shares the event time with the last sample of the previous one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Vec<SystemState>>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn samples(&self) -> impl Iterator<Item = &SystemState> {
        self.segments.iter().flatten()
    }

    pub fn first_state(&self) -> Option<&SystemState> {
        self.segments.first().and_then(|s| s.first())
    }

    pub fn final_state(&self) -> Option<&SystemState> {
        self.segments.last().and_then(|s| s.last())
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn collision(&self) -> Option<&Event> {
        self.events_of(EventKind::Collision).next()
    }

    pub fn termination(&self) -> Option<&Event> {
        self.events_of(EventKind::Termination).next()
    }
}

fn pack(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unpack(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn physical_field(intensities: Vec<Complex64>) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<()> {
    move |_t, y, dy| {
        let v = model::field(&unpack(y), &intensities)?;
        for (out, v) in dy.chunks_exact_mut(2).zip(v) {
            out[0] = v.re;
            out[1] = v.im;
        }
        Ok(())
    }
}

/// One classical fourth-order Runge–Kutta step of size `h`.
pub fn rk4_step(state: &SystemState, h: f64) -> Result<SystemState> {
    let z = state.positions();
    let g = state.intensities();
    let eval = |z: &[Complex64]| model::field(z, &g);
    let shift = |a: f64, k: &[Complex64]| -> Vec<Complex64> {
        z.iter().zip(k).map(|(z, k)| z + k * a).collect()
    };
    let k1 = eval(&z)?;
    let k2 = eval(&shift(h / 2.0, &k1))?;
    let k3 = eval(&shift(h / 2.0, &k2))?;
    let k4 = eval(&shift(h, &k3))?;
    let next: Vec<_> = (0..z.len())
        .map(|i| z[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect();
    Ok(SystemState::from_raw(state.time + h, &state.particles, &next))
}

/// Squared distance from the origin of the segment `a -> b`.
fn segment_min_sqr(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a.norm_sqr();
    }
    let s = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
    (a + d * s).norm_sqr()
}

fn min_separation_sqr(z: &[Complex64]) -> f64 {
    closest_pair(z).map_or(f64::INFINITY, |(_, _, d)| d * d)
}

/// Bracket for [`locate_collision`]: a state and a step across which some
/// pair separation drops below the collision radius.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBracket {
    pub start: SystemState,
    pub step: f64,
}

/// Refined crossing: the event and the state at the event time.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionFix {
    pub event: Event,
    pub state: SystemState,
}

/// Find the first crossing of the collision radius inside `bracket` and the
/// colliding cluster. The bracket is scanned with error control, so it may
/// be wider than a single step.
pub fn locate_collision(bracket: &StepBracket, opts: &IntegratorOptions) -> Result<Event> {
    let start = &bracket.start;
    let eps = opts.collision_radius;
    if bracket.step == 0.0 || min_separation_sqr(&start.positions()) <= eps * eps {
        return Err(Error::NoCrossing);
    }
    let direction = if bracket.step > 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let scan = IntegratorOptions { direction, ..*opts };
    let traj = integrate_adaptive(start, start.time + bracket.step, &scan)?;
    traj.collision().cloned().ok_or(Error::NoCrossing)
}

/// Bisect the crossing inside one error-controlled step, evaluating
/// intermediate states with a single trial step from `bracket.start`.
pub(crate) fn refine_collision(bracket: &StepBracket, opts: &IntegratorOptions) -> Result<CollisionFix> {
    let start = &bracket.start;
    let eps2 = opts.collision_radius * opts.collision_radius;
    let f = physical_field(start.intensities());
    let y0 = pack(&start.positions());
    let advance = |h: f64| -> Result<Vec<Complex64>> {
        Ok(unpack(&dopri::trial_step(&f, start.time, &y0, h)?.y))
    };
    if min_separation_sqr(&start.positions()) <= eps2 {
        return Err(Error::NoCrossing);
    }
    let mut hi_z = match advance(bracket.step) {
        Ok(z) => z,
        Err(Error::Coincident { .. }) => return Err(Error::NoCrossing),
        Err(e) => return Err(e),
    };
    if min_separation_sqr(&hi_z) > eps2 {
        return Err(Error::NoCrossing);
    }
    let (mut lo, mut hi) = (0.0f64, bracket.step);
    while (hi - lo).abs() > CROSSING_TOLERANCE * bracket.step.abs() {
        let mid = 0.5 * (lo + hi);
        match advance(mid) {
            Ok(z) if min_separation_sqr(&z) > eps2 => lo = mid,
            Ok(z) => {
                hi = mid;
                hi_z = z;
            }
            Err(Error::Coincident { .. }) => hi = mid,
            Err(e) => return Err(e),
        }
    }
    let state = SystemState::from_raw(start.time + hi, &start.particles, &hi_z);
    let event = collision_event(&state, opts.collision_radius);
    Ok(CollisionFix { event, state })
}

/// Cluster containing the closest pair: single linkage at
/// `CLUSTER_FACTOR * radius`.
fn collision_event(state: &SystemState, radius: f64) -> Event {
    let z = state.positions();
    let (a, b, _) = closest_pair(&z).expect("collision needs two particles");
    let link = CLUSTER_FACTOR * radius;
    let mut members = vec![a, b];
    let mut grew = true;
    while grew {
        grew = false;
        for k in 0..z.len() {
            if members.contains(&k) {
                continue;
            }
            if members.iter().any(|&m| (z[m] - z[k]).norm() <= link) {
                members.push(k);
                grew = true;
            }
        }
    }
    members.sort_unstable();
    let location = members.iter().map(|&m| z[m]).sum::<Complex64>() / members.len() as f64;
    Event {
        kind: EventKind::Collision,
        time: state.time,
        participants: members.iter().map(|&m| state.particles[m].id).collect(),
        location,
        termination: None,
    }
}

/// Advance `state` to `t_end`, stopping early at the first collision or when
/// the step floor is hit.
pub fn integrate_adaptive(state: &SystemState, t_end: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    opts.validate()?;
    let span = t_end - state.time;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::InvalidOptions(format!(
            "t_end {t_end} must differ from the start time {}",
            state.time
        )));
    }
    if span.signum() != opts.direction.sign() {
        return Err(Error::InvalidOptions(format!(
            "t_end {t_end} lies against the {:?} direction",
            opts.direction
        )));
    }

    let eps = opts.collision_radius;
    let eps2 = eps * eps;
    let mut samples = vec![state.clone()];
    if state.len() >= 2 && min_separation_sqr(&state.positions()) <= eps2 {
        let event = collision_event(state, eps);
        return Ok(Trajectory {
            segments: vec![samples],
            events: vec![event],
        });
    }

    let f = physical_field(state.intensities());
    let mut crossing: Option<StepBracket> = None;
    let template = &state.particles;
    let outcome = dopri::drive(&f, state.time, &pack(&state.positions()), t_end, &opts.control(), |t, y, t_new, y_new| {
        let old = unpack(y);
        let new = unpack(y_new);
        let n = old.len();
        let mut hit = false;
        for k in 0..n {
            for l in (k + 1)..n {
                let (a, b) = (old[k] - old[l], new[k] - new[l]);
                if b.norm_sqr() <= eps2 {
                    hit = true;
                } else if segment_min_sqr(a, b) <= eps2 {
                    // The pair may have passed through each other inside the step.
                    return Ok(Verdict::Retry);
                }
            }
        }
        if hit {
            crossing = Some(StepBracket {
                start: SystemState::from_raw(t, template, &old),
                step: t_new - t,
            });
            return Ok(Verdict::Stop);
        }
        samples.push(SystemState::from_raw(t_new, template, &new));
        Ok(Verdict::Continue)
    })?;

    let mut events = Vec::new();
    match outcome.finish {
        Finish::Reached => {}
        Finish::Stopped => {
            let bracket = crossing.expect("stop is only requested at a crossing");
            let fix = refine_collision(&bracket, opts)?;
            samples.push(fix.state);
            events.push(fix.event);
        }
        Finish::StepFloor { step } => {
            let last = samples.last().expect("samples start nonempty");
            let z = last.positions();
            let pair = closest_pair(&z);
            let location = pair.map_or(z[0], |(a, b, _)| 0.5 * (z[a] + z[b]));
            let ids = pair.map(|(a, b, _)| (last.particles[a].id, last.particles[b].id));
            events.push(Event {
                kind: EventKind::Termination,
                time: last.time,
                participants: ids.map_or_else(Vec::new, |(a, b)| vec![a, b]),
                location,
                termination: Some(Termination::StepFloor {
                    step,
                    closest_pair: ids,
                }),
            });
        }
    }
    Ok(Trajectory {
        segments: vec![samples],
        events,
    })
}

/// Result of applying the merge rule to one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub state: Option<SystemState>,
    /// The merged particle, absent when the intensities summed to zero.
    pub merged: Option<Particle>,
    pub location: Complex64,
}

fn merge_with_id(state: &SystemState, participants: &[usize], new_id: usize) -> Result<MergeOutcome> {
    if participants.is_empty() {
        return Err(Error::EmptyParticipants);
    }
    let mut members = Vec::with_capacity(participants.len());
    for &id in participants {
        let idx = state.index_of(id).ok_or(Error::UnknownParticle(id))?;
        if !members.contains(&idx) {
            members.push(idx);
        }
    }
    let cluster: Vec<&Particle> = members.iter().map(|&i| &state.particles[i]).collect();
    let total: Complex64 = cluster.iter().map(|p| p.intensity.value()).sum();
    let scale: f64 = cluster.iter().map(|p| p.intensity.value().norm()).sum();
    let centroid = cluster.iter().map(|p| p.position).sum::<Complex64>() / cluster.len() as f64;
    let extent = cluster
        .iter()
        .map(|p| (p.position - centroid).norm())
        .fold(0.0, f64::max);

    let (merged, location) = if total.norm() <= 1e-12 * scale {
        (None, centroid)
    } else {
        let weighted = cluster
            .iter()
            .map(|p| p.intensity.value() * p.position)
            .sum::<Complex64>()
            / total;
        // Complex weights can throw the weighted point far from the cluster
        // when the total nearly cancels; stay inside it in that case.
        let location = if (weighted - centroid).norm() <= 2.0 * extent.max(f64::EPSILON) {
            weighted
        } else {
            centroid
        };
        (Some(Particle::new(new_id, location, Intensity::new(total)?)), location)
    };

    let mut particles: Vec<Particle> = state
        .particles
        .iter()
        .enumerate()
        .filter(|(i, _)| !members.contains(i))
        .map(|(_, p)| *p)
        .collect();
    if let Some(p) = merged {
        particles.push(p);
    }
    let state = if particles.is_empty() {
        None
    } else {
        Some(SystemState {
            time: state.time,
            particles,
        })
    };
    Ok(MergeOutcome {
        state,
        merged,
        location,
    })
}

/// Replace the particles with the given ids by one particle carrying their
/// summed intensity. A zero sum removes them. The merged particle gets id
/// `max id + 1`.
pub fn merge_particles(state: &SystemState, participants: &[usize]) -> Result<MergeOutcome> {
    let next = state.particles.iter().map(|p| p.id).max().map_or(0, |m| m + 1);
    merge_with_id(state, participants, next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub initial: SystemState,
    pub t_end: f64,
    pub options: IntegratorOptions,
    /// Keep every `sample_stride`-th accepted step (segment ends always kept).
    pub sample_stride: usize,
}

impl SimulationConfig {
    pub fn new(initial: SystemState, t_end: f64) -> Self {
        let direction = if t_end < initial.time {
            Direction::Backward
        } else {
            Direction::Forward
        };
        Self {
            initial,
            t_end,
            options: IntegratorOptions {
                direction,
                ..IntegratorOptions::default()
            },
            sample_stride: 1,
        }
    }
}

fn thin(samples: Vec<SystemState>, stride: usize) -> Vec<SystemState> {
    if stride <= 1 || samples.len() <= 2 {
        return samples;
    }
    let last = samples.len() - 1;
    samples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, s)| s)
        .collect()
}

/// Integrate to `t_end`, merging colliding clusters and continuing until
/// fewer than two particles remain.
pub fn simulate(config: &SimulationConfig) -> Result<Trajectory> {
    config.options.validate()?;
    let mut traj = Trajectory::default();
    let mut state = config.initial.clone();
    let mut next_id = state.particles.iter().map(|p| p.id).max().map_or(0, |m| m + 1);

    loop {
        if state.len() < 2 {
            let mut tail = vec![state.clone()];
            if state.time != config.t_end {
                tail.push(SystemState {
                    time: config.t_end,
                    ..state.clone()
                });
            }
            traj.segments.push(tail);
            break;
        }
        if state.time == config.t_end {
            traj.segments.push(vec![state.clone()]);
            break;
        }
        let mut leg = integrate_adaptive(&state, config.t_end, &config.options)?;
        let samples = leg.segments.pop().unwrap_or_default();
        let end = samples.last().cloned().unwrap_or_else(|| state.clone());
        traj.segments.push(thin(samples, config.sample_stride));
        let collision = leg.events.iter().find(|e| e.kind == EventKind::Collision).cloned();
        traj.events.append(&mut leg.events);

        let Some(collision) = collision else { break };
        let outcome = merge_with_id(&end, &collision.participants, next_id)?;
        next_id += 1;
        traj.events.push(Event {
            kind: EventKind::Merge,
            time: collision.time,
            participants: collision.participants.clone(),
            location: outcome.location,
            termination: None,
        });
        match outcome.state {
            Some(next) => state = next,
            None => break,
        }
    }
    Ok(traj)
}

/// Run independent simulations, in parallel with the `parallel` feature.
pub fn simulate_batch(configs: &[SimulationConfig]) -> Vec<Result<Trajectory>> {
    par::map(configs, simulate)
}

pub fn simulate_batch_sequential(configs: &[SimulationConfig]) -> Vec<Result<Trajectory>> {
    par::map_sequential(configs, simulate)
}
