//! Run configuration read from TOML.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use pointflow::integrate::{Direction, IntegratorOptions, SimulationConfig};
use pointflow::{Complex64, Intensity, Particle, SystemState};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub x: f64,
    pub y: f64,
    pub gamma_re: f64,
    #[serde(default)]
    pub gamma_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub initial_step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub collision_radius: f64,
    pub step_floor: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let o = IntegratorOptions::default();
        Self {
            initial_step: o.initial_step,
            abs_tol: o.abs_tol,
            rel_tol: o.rel_tol,
            collision_radius: o.collision_radius,
            step_floor: o.step_floor,
            max_steps: o.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupSpec {
    pub enabled: bool,
    /// Particle index used as the origin of the relative chart.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<usize>,
    /// Particle indices whose collisions with the base are regularized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<usize>>,
    pub s_end: f64,
}

impl Default for BlowupSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            base: None,
            selection: None,
            s_end: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub report: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PathBuf>,
    /// Samples of the blow-up chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default = "one")]
    pub sample_stride: usize,
    pub particles: Vec<ParticleSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub blowup: BlowupSpec,
    pub outputs: OutputSpec,
}

fn one() -> usize {
    1
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.particles.is_empty() {
            return Err(invalid("config: at least one particle is required"));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if ![p.x, p.y, p.gamma_re, p.gamma_im].iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("particle {i}: non-finite value")));
            }
            if p.gamma_re == 0.0 && p.gamma_im == 0.0 {
                return Err(invalid(format!("particle {i}: intensity must be nonzero")));
            }
        }
        if !self.t_end.is_finite() || self.t_end == 0.0 {
            return Err(invalid("config: t_end must be finite and nonzero"));
        }
        if let Some(d) = self.direction {
            if d != direction_of(self.t_end) {
                return Err(invalid("config: direction disagrees with the sign of t_end"));
            }
        }
        if self.sample_stride == 0 {
            return Err(invalid("config: sample_stride must be at least 1"));
        }
        self.options().validate().map_err(|e| invalid(format!("integrator: {e}")))?;
        let n = self.particles.len();
        if let Some(b) = self.blowup.base {
            if b >= n {
                return Err(invalid(format!("blowup: base {b} is not a particle index")));
            }
        }
        if let Some(sel) = &self.blowup.selection {
            for &j in sel {
                if j >= n || Some(j) == self.blowup.base {
                    return Err(invalid(format!("blowup: selection entry {j} is not a non-base particle index")));
                }
            }
        }
        if !self.blowup.s_end.is_finite() || self.blowup.s_end <= 0.0 {
            return Err(invalid("blowup: s_end must be positive"));
        }
        let paths = self.output_paths();
        let unique: HashSet<&PathBuf> = paths.iter().copied().collect();
        if unique.len() != paths.len() {
            return Err(invalid("outputs: paths must be distinct"));
        }
        self.initial_state()?;
        Ok(())
    }

    fn output_paths(&self) -> Vec<&PathBuf> {
        let o = &self.outputs;
        [Some(&o.trajectory), Some(&o.events), Some(&o.report), o.plot.as_ref(), o.chart.as_ref()]
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn options(&self) -> IntegratorOptions {
        let i = &self.integrator;
        IntegratorOptions {
            initial_step: i.initial_step,
            abs_tol: i.abs_tol,
            rel_tol: i.rel_tol,
            collision_radius: i.collision_radius,
            step_floor: i.step_floor,
            max_steps: i.max_steps,
            direction: direction_of(self.t_end),
        }
    }

    pub fn initial_state(&self) -> Result<SystemState, CliError> {
        let particles = self
            .particles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let g = Intensity::new(Complex64::new(p.gamma_re, p.gamma_im))
                    .map_err(|e| invalid(format!("particle {i}: {e}")))?;
                Ok(Particle::new(i, Complex64::new(p.x, p.y), g))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        SystemState::new(0.0, particles).map_err(|e| invalid(format!("particles: {e}")))
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            initial: self.initial_state()?,
            t_end: self.t_end,
            options: self.options(),
            sample_stride: self.sample_stride,
        })
    }
}

fn direction_of(t_end: f64) -> Direction {
    if t_end < 0.0 {
        Direction::Backward
    } else {
        Direction::Forward
    }
}

/// Output paths resolved against the directory holding the config file.
#[derive(Debug, Clone)]
pub struct ResolvedOutputs {
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub report: PathBuf,
    pub plot: Option<PathBuf>,
    pub chart: Option<PathBuf>,
}

impl ResolvedOutputs {
    pub fn new(outputs: &OutputSpec, config_path: &Path) -> Self {
        let dir = config_path.parent().unwrap_or(Path::new(""));
        let at = |p: &PathBuf| dir.join(p);
        Self {
            trajectory: at(&outputs.trajectory),
            events: at(&outputs.events),
            report: at(&outputs.report),
            plot: outputs.plot.as_ref().map(at),
            chart: outputs.chart.as_ref().map(at),
        }
    }
}
