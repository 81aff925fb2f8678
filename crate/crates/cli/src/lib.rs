//! Command-line driver for `pointflow`: config ingestion, simulation runs,
//! closed-form samples, blow-up runs, invariant reports and plots.
//!
//! Exit codes: 0 on success, 2 for input or validation errors, 3 when the
//! integrator hits its step floor and no blow-up handoff is configured.

pub mod config;
pub mod io;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pointflow::analytic::TwoBodySolution;
use pointflow::blowup::{integrate_blowup, to_relative_with_base, BlowupSelection, BlowupTrajectory};
use pointflow::integrate::{simulate, Termination};
use pointflow::{Complex64, SystemState, Trajectory};

use config::{ResolvedOutputs, RunConfig};
use report::{build_report, svg_paths, to_json, WeightSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// What a `simulate` run produced.
#[derive(Debug)]
pub struct SimulateOutcome {
    pub trajectory: Trajectory,
    pub chart: Option<BlowupTrajectory>,
}

/// Run a config and write its outputs. Outputs are written even when the
/// run ends on the step floor, before the error is returned.
pub fn run_simulate(config_path: &Path) -> Result<SimulateOutcome, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let out = ResolvedOutputs::new(&cfg.outputs, config_path);
    let traj = simulate(&cfg.simulation()?).map_err(|e| CliError::Numerical(format!("simulate: {e}")))?;

    io::write_trajectory(create(&out.trajectory)?, &traj)?;
    io::write_events(create(&out.events)?, &traj.events)?;
    let first = traj.segments.first().map(Vec::as_slice).unwrap_or_default();
    let json = match build_report(first, &WeightSpec::Real) {
        Ok(r) => to_json(&r),
        Err(e) => format!("{}\n", serde_json::json!({ "error": e.to_string() })),
    };
    write_text(&out.report, &json)?;
    if let Some(plot) = &out.plot {
        write_text(plot, &svg_paths(traj.samples()))?;
    }

    let Some(term) = traj.termination().cloned() else {
        return Ok(SimulateOutcome {
            trajectory: traj,
            chart: None,
        });
    };
    let Some(Termination::StepFloor { step, closest_pair }) = term.termination else {
        unreachable!("termination events carry a reason")
    };
    if !cfg.blowup.enabled {
        let pair = closest_pair.map_or(String::new(), |(a, b)| format!(" near particles {a} and {b}"));
        return Err(CliError::Numerical(format!(
            "step floor reached at t = {}{pair} (step {step:e}); enable [blowup] to continue in the chart",
            term.time
        )));
    }
    let end = traj.final_state().expect("trajectory has samples").clone();
    let (base, selection) = match (cfg.blowup.base, &cfg.blowup.selection, closest_pair) {
        (Some(b), Some(sel), _) => (b, sel.clone()),
        (Some(b), None, Some((p, q))) => (b, vec![if p == b { q } else { p }]),
        (None, sel, Some((p, q))) => (q, sel.clone().unwrap_or(vec![p])),
        _ => return Err(CliError::Numerical("blowup: no pair to regularize".into())),
    };
    let chart = run_chart(&end, base, &selection, &cfg)?;
    if let Some(path) = &out.chart {
        io::write_chart(create(path)?, &chart.samples)?;
    }
    Ok(SimulateOutcome {
        trajectory: traj,
        chart: Some(chart),
    })
}

/// Integrate the blown-up system from `state`. `base` and `selection` are
/// particle ids.
fn run_chart(
    state: &SystemState,
    base: usize,
    selection: &[usize],
    cfg: &RunConfig,
) -> Result<BlowupTrajectory, CliError> {
    let index = |id: usize| {
        state
            .index_of(id)
            .ok_or_else(|| CliError::Input(format!("blowup: particle {id} is not present at t = {}", state.time)))
    };
    let base_index = index(base)?;
    let rel = to_relative_with_base(state, base_index).map_err(|e| CliError::Input(format!("blowup: {e}")))?;
    let picked = selection.iter().map(|&id| index(id)).collect::<Result<Vec<_>, _>>()?;
    let sel = BlowupSelection::for_particles(&rel, &picked).map_err(|e| CliError::Input(format!("blowup: {e}")))?;
    let mut opts = cfg.options();
    opts.direction = pointflow::Direction::Forward;
    integrate_blowup(&rel, &sel, cfg.blowup.s_end, &opts).map_err(|e| CliError::Numerical(format!("blowup: {e}")))
}

/// Run the blow-up chart from the initial state of a config. Without an
/// explicit choice the base is the last particle and the selection is the
/// particle nearest to it.
pub fn run_blowup(config_path: &Path) -> Result<BlowupTrajectory, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let state = cfg.initial_state()?;
    if state.len() < 2 {
        return Err(CliError::Input("blowup: at least two particles are required".into()));
    }
    let base = cfg.blowup.base.unwrap_or(state.len() - 1);
    let selection = match &cfg.blowup.selection {
        Some(sel) => sel.clone(),
        None => {
            let zb = state.particles[base].position;
            let nearest = (0..state.len())
                .filter(|&k| k != base)
                .min_by(|&a, &b| {
                    let da = (state.particles[a].position - zb).norm();
                    let db = (state.particles[b].position - zb).norm();
                    da.total_cmp(&db)
                })
                .expect("two particles");
            vec![nearest]
        }
    };
    let chart = run_chart(&state, base, &selection, &cfg)?;
    let out = ResolvedOutputs::new(&cfg.outputs, config_path);
    match &out.chart {
        Some(path) => io::write_chart(create(path)?, &chart.samples)?,
        None => io::write_chart(std::io::stdout().lock(), &chart.samples)?,
    }
    if let Some(step) = chart.stalled_at_step {
        return Err(CliError::Numerical(format!("blowup: step floor reached (step {step:e})")));
    }
    Ok(chart)
}

/// Read a trajectory CSV and write its report, optionally with a plot.
pub fn run_report(
    trajectory: &Path,
    weights: &WeightSpec,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> Result<report::ReportJson, CliError> {
    let file = File::open(trajectory).map_err(|e| CliError::Input(format!("{}: {e}", trajectory.display())))?;
    let samples = io::read_trajectory(file)?;
    let r = build_report(&samples, weights)?;
    let json = to_json(&r);
    match out {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    if let Some(path) = plot {
        write_text(path, &svg_paths(&samples))?;
    }
    Ok(r)
}

/// Parameters of the closed-form two-body samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    pub sum: Complex64,
    pub r0: f64,
    pub theta0: f64,
    pub t_end: f64,
    pub samples: usize,
}

pub const ANALYTIC_HEADER: [&str; 5] = ["t", "r", "theta", "x", "y"];

/// CSV of `r`, unwrapped `θ` and the relative position on `[0, t_end]`.
pub fn analytic_csv(p: &AnalyticParams) -> Result<String, CliError> {
    if p.samples < 2 || p.r0.is_nan() || p.r0 <= 0.0 || !p.t_end.is_finite() {
        return Err(CliError::Input("analytic: need r0 > 0, finite t_end and at least 2 samples".into()));
    }
    let sol = TwoBodySolution::new(p.sum, p.r0, p.theta0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(ANALYTIC_HEADER).map_err(row_err)?;
    for i in 0..p.samples {
        let t = p.t_end * i as f64 / (p.samples - 1) as f64;
        let (r, theta) = if p.sum == Complex64::new(0.0, 0.0) {
            (p.r0, p.theta0)
        } else {
            sol.polar(t).map_err(|e| CliError::Input(format!("analytic: {e}")))?
        };
        let z = Complex64::from_polar(r, theta);
        w.write_record([io::fmt(t), io::fmt(r), io::fmt(theta), io::fmt(z.re), io::fmt(z.im)])
            .map_err(row_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_rows() {
        let p = AnalyticParams {
            sum: Complex64::new(2.0, 2.0),
            r0: 1.0,
            theta0: 0.0,
            t_end: 0.1875,
            samples: 2,
        };
        let csv = analytic_csv(&p).unwrap();
        let last = csv.lines().last().unwrap();
        let fields: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((fields[1] - 0.5).abs() < 1e-15);
        assert!((fields[2] + 2f64.ln()).abs() < 1e-14);
        let beyond = AnalyticParams { t_end: 0.25, ..p };
        assert!(analytic_csv(&beyond).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
    }
}
