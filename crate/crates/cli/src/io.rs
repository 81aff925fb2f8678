//! CSV formats for trajectories, events and blow-up charts.

use std::io::{Read, Write};

use pointflow::blowup::RelativeState;
use pointflow::{Complex64, Event, Intensity, Particle, SystemState, Trajectory};
use serde::Deserialize;

use crate::CliError;

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "particle_id", "x", "y", "gamma_re", "gamma_im"];
pub const EVENTS_HEADER: [&str; 5] = ["t", "kind", "participants", "x", "y"];
pub const CHART_HEADER: [&str; 6] = ["s", "t", "base_id", "particle_id", "xi_re", "xi_im"];

/// Seventeen significant digits in scientific notation.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::Io(e.to_string()),
        _ => CliError::Input(format!("csv: {e}")),
    }
}

fn state_rows<W: Write>(out: &mut csv::Writer<W>, s: &SystemState) -> Result<(), CliError> {
    for p in &s.particles {
        let g = p.intensity.value();
        out.write_record([
            fmt(s.time),
            p.id.to_string(),
            fmt(p.position.re),
            fmt(p.position.im),
            fmt(g.re),
            fmt(g.im),
        ])
        .map_err(csv_error)?;
    }
    Ok(())
}

/// One row per particle per sample. The first sample of a segment after a
/// merge shares its time with the last sample before it and is skipped, so
/// every time in the file names a single sample.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    let mut last_time = None;
    for s in traj.samples() {
        if last_time == Some(s.time) {
            continue;
        }
        state_rows(&mut out, s)?;
        last_time = Some(s.time);
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_events<W: Write>(w: W, events: &[Event]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENTS_HEADER).map_err(csv_error)?;
    for e in events {
        let ids: Vec<String> = e.participants.iter().map(|id| id.to_string()).collect();
        out.write_record([
            fmt(e.time),
            e.kind.as_str().to_string(),
            ids.join(";"),
            fmt(e.location.re),
            fmt(e.location.im),
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_chart<W: Write>(w: W, samples: &[RelativeState]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CHART_HEADER).map_err(csv_error)?;
    for r in samples {
        let base = r.ids[r.base];
        for (j, &i) in r.others().iter().enumerate() {
            out.write_record([
                fmt(r.s),
                fmt(r.t),
                base.to_string(),
                r.ids[i].to_string(),
                fmt(r.xi[j].re),
                fmt(r.xi[j].im),
            ])
            .map_err(csv_error)?;
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    particle_id: usize,
    x: f64,
    y: f64,
    gamma_re: f64,
    gamma_im: f64,
}

/// Read a trajectory file back into samples, grouping consecutive rows that
/// share a time.
pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<SystemState>, CliError> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(CliError::Input(format!(
            "trajectory: expected header {}",
            TRAJECTORY_HEADER.join(",")
        )));
    }
    let mut samples = Vec::new();
    let mut current: Option<(f64, Vec<Particle>)> = None;
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(csv_error)?;
        let bad = |what: String| CliError::Input(format!("trajectory row {}: {what}", line + 1));
        let intensity = Intensity::new(Complex64::new(row.gamma_re, row.gamma_im)).map_err(|e| bad(e.to_string()))?;
        let particle = Particle::new(row.particle_id, Complex64::new(row.x, row.y), intensity);
        match &mut current {
            Some((t, ps)) if *t == row.t => ps.push(particle),
            _ => {
                if let Some((t, ps)) = current.take() {
                    samples.push(SystemState::new(t, ps).map_err(|e| bad(e.to_string()))?);
                }
                current = Some((row.t, vec![particle]));
            }
        }
    }
    if let Some((t, ps)) = current {
        samples.push(SystemState::new(t, ps).map_err(|e| CliError::Input(format!("trajectory: {e}")))?);
    }
    if samples.is_empty() {
        return Err(CliError::Input("trajectory: no samples".into()));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pointflow::integrate::{simulate, SimulationConfig};

    #[test]
    fn formatting_round_trips() {
        for v in [0.25, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn trajectory_round_trips_through_csv() {
        let s = SystemState::from_real(
            0.0,
            &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            &[1.0, 1.0],
        )
        .unwrap();
        let traj = simulate(&SimulationConfig::new(s, 1.0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        let expected: Vec<&SystemState> = traj.segments[0].iter().chain(&traj.segments[1][1..]).collect();
        assert_eq!(back.len(), expected.len());
        for (a, b) in back.iter().zip(expected) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_trajectory("".as_bytes()).is_err());
        assert!(read_trajectory("t,particle_id,x,y,gamma_re,gamma_im\n".as_bytes()).is_err());
        assert!(read_trajectory("t,id,x,y\n0,0,0,0\n".as_bytes()).is_err());
        assert!(read_trajectory("t,particle_id,x,y,gamma_re,gamma_im\n0,0,0,0,oops,0\n".as_bytes()).is_err());
        assert!(read_trajectory("t,particle_id,x,y,gamma_re,gamma_im\n0,0,0,0,0,0\n".as_bytes()).is_err());
    }
}
