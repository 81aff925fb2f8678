use std::path::Path;
use std::process::{Command, Output};

use pointflow_cli::config::RunConfig;
use pointflow_cli::report::WeightSpec;
use pointflow_cli::{run_report, run_simulate};

fn pointflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn fixture_text(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

const VORTEX_PAIR: &str = r#"
t_end = 3.5

[[particles]]
x = 0.0
y = 0.0
gamma_re = 0.0
gamma_im = -1.0

[[particles]]
x = 1.0
y = 0.0
gamma_re = 0.0
gamma_im = -1.0

[outputs]
trajectory = "trajectory.csv"
events = "events.csv"
report = "report.json"
"#;

#[test]
fn source_pair_report_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, fixture_text("source_pair.toml")).unwrap();
    let outcome = run_simulate(&config).unwrap();
    assert_eq!(outcome.trajectory.events.len(), 2);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    let kinds: Vec<&str> = events.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(kinds, ["collision", "merge"]);

    let r = run_report(&dir.path().join("trajectory.csv"), &WeightSpec::Real, Some(&dir.path().join("again.json")), None)
        .unwrap();
    assert!((r.idot_slope.unwrap() + 2.0).abs() < 1e-6);
    assert!(r.max_abs_a <= 1e-12);
    assert!(r.conjecture_holds);
    let written = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(written, std::fs::read_to_string(dir.path().join("again.json")).unwrap());
}

#[test]
fn vortex_pair_report_is_out_of_scope() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("vortex.toml");
    std::fs::write(&config, VORTEX_PAIR).unwrap();
    run_simulate(&config).unwrap();
    let out = pointflow(&["report", "trajectory.csv", "--weights", "im", "--plot", "paths.svg"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["scope"], "non-source");
    assert_eq!(json["conjecture_holds"], false);
    assert!(json["winding"][0]["delta"].as_f64().unwrap().abs() > 2.0 * std::f64::consts::PI);
    assert!(json["idot_slope"].is_null());
    let svg = std::fs::read_to_string(dir.path().join("paths.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 2);
}

#[test]
fn malformed_trajectories_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    std::fs::write(dir.path().join("header.csv"), "t,particle_id,x,y,gamma_re,gamma_im\n").unwrap();
    std::fs::write(dir.path().join("junk.csv"), "t,particle_id,x,y,gamma_re,gamma_im\n0,0,a,b,c,d\n").unwrap();
    for file in ["empty.csv", "header.csv", "junk.csv", "missing.csv"] {
        let out = pointflow(&["report", file], dir.path());
        assert_eq!(out.status.code(), Some(2), "{file}");
        assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
    }
}

#[test]
fn printed_config_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, fixture_text("step_floor.toml")).unwrap();
    let out = pointflow(&["simulate", "run.toml", "--print-config"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let echoed = RunConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(echoed, RunConfig::load(&config).unwrap());
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn step_floor_hands_off_to_the_chart() {
    let dir = tempfile::tempdir().unwrap();
    let text = fixture_text("step_floor.toml").replace("report = \"report.json\"", "report = \"report.json\"\nchart = \"chart.csv\"")
        + "\n[blowup]\nenabled = true\ns_end = 8.0\n";
    std::fs::write(dir.path().join("run.toml"), text).unwrap();
    let out = pointflow(&["simulate", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let chart = std::fs::read_to_string(dir.path().join("chart.csv")).unwrap();
    let last: Vec<f64> = chart.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // The spiralling pair collides at t* = r0^2 / (2 Re S) = 1.
    assert!((last[1] - 1.0).abs() < 1e-6, "t = {}", last[1]);
    assert!(last[4].hypot(last[5]) < 1e-8);
}

#[test]
fn analytic_and_blowup_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = pointflow(
        &["analytic", "--sum-re", "2", "--sum-im", "2", "--t-end", "0.1875", "--samples", "4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().starts_with("1.8750000000000000e-1,5.0000000000000000e-1,"));
    let beyond = pointflow(&["analytic", "--sum-re", "2", "--t-end", "0.5"], dir.path());
    assert_eq!(beyond.status.code(), Some(2));

    std::fs::write(dir.path().join("pair.toml"), fixture_text("source_pair.toml")).unwrap();
    let out = pointflow(&["blowup", "pair.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("s,t,base_id,particle_id,xi_re,xi_im\n"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[1] - 0.25).abs() < 1e-6);
}
