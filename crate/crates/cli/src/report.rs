//! Report JSON and SVG path plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pointflow::diagnostics::{report_samples, Scope};
use pointflow::{SystemState, WeightVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    pub first: usize,
    pub second: usize,
    pub delta: f64,
    pub net: f64,
}

/// Flat, fixed-order rendering of the invariant report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub scope: Scope,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub weights: Vec<f64>,
    pub z_drift: f64,
    #[serde(rename = "max_abs_A")]
    pub max_abs_a: f64,
    #[serde(rename = "max_rel_A")]
    pub max_rel_a: f64,
    pub idot_slope: Option<f64>,
    pub idot_predicted: Option<f64>,
    pub idot_residual: Option<f64>,
    pub inertia_max_deviation: Option<f64>,
    pub inertia_strictly_monotone: Option<bool>,
    pub virial: f64,
    pub complex_virial: [f64; 2],
    pub h_start: Option<f64>,
    pub h_end: Option<f64>,
    pub g_start: Option<f64>,
    pub g_end: Option<f64>,
    pub winding: Vec<PairJson>,
    pub g_drift: f64,
    pub conjecture_holds: bool,
}

/// How to weight particles in the report.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// Source strengths, `Re G`.
    Real,
    /// Vorticities, `-Im G`.
    Imaginary,
    List(Vec<f64>),
}

impl std::str::FromStr for WeightSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "re" => Ok(Self::Real),
            "im" => Ok(Self::Imaginary),
            list => list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Self::List)
                .map_err(|_| CliError::Input(format!("weights: expected re, im or a comma list, got {list:?}"))),
        }
    }
}

impl WeightSpec {
    pub fn resolve(&self, state: &SystemState) -> Result<WeightVector, CliError> {
        match self {
            Self::Real => Ok(WeightVector::source_weights(state)),
            Self::Imaginary => Ok(WeightVector::vortex_weights(state)),
            Self::List(w) if w.len() == state.len() => Ok(WeightVector::new(w.clone())),
            Self::List(w) => Err(CliError::Input(format!(
                "weights: {} values for {} particles",
                w.len(),
                state.len()
            ))),
        }
    }
}

/// Leading run of samples that share one particle set.
pub fn first_span(samples: &[SystemState]) -> &[SystemState] {
    let ids = samples.first().map(|s| s.ids()).unwrap_or_default();
    let end = samples.iter().position(|s| s.ids() != ids).unwrap_or(samples.len());
    &samples[..end]
}

pub fn build_report(samples: &[SystemState], weights: &WeightSpec) -> Result<ReportJson, CliError> {
    let span = first_span(samples);
    let first = span.first().ok_or_else(|| CliError::Input("report: no samples".into()))?;
    let w = weights.resolve(first)?;
    let r = report_samples(span, &w).map_err(|e| CliError::Input(format!("report: {e}")))?;
    Ok(ReportJson {
        scope: r.scope,
        t_start: r.t_start,
        t_end: r.t_end,
        samples: r.samples,
        weights: w.0,
        z_drift: r.z_drift,
        max_abs_a: r.max_abs_a,
        max_rel_a: r.max_rel_a,
        idot_slope: r.inertia.map(|f| f.slope),
        idot_predicted: r.inertia.map(|f| f.predicted_slope),
        idot_residual: r.inertia.map(|f| f.residual),
        inertia_max_deviation: r.inertia.map(|f| f.max_deviation),
        inertia_strictly_monotone: r.inertia.map(|f| f.strictly_monotone),
        virial: r.virial,
        complex_virial: [r.complex_virial.re, r.complex_virial.im],
        h_start: r.h_start,
        h_end: r.h_end,
        g_start: r.g_start,
        g_end: r.g_end,
        winding: r
            .winding
            .pairs
            .iter()
            .map(|p| PairJson {
                first: p.first,
                second: p.second,
                delta: p.delta,
                net: p.net,
            })
            .collect(),
        g_drift: r.winding.g_drift,
        conjecture_holds: r.conjecture_holds,
    })
}

pub fn to_json(report: &ReportJson) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// One `<path>` per particle id, y pointing up, viewBox padded by 5%.
pub fn svg_paths<'a>(samples: impl IntoIterator<Item = &'a SystemState>) -> String {
    let mut paths: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for s in samples {
        for p in &s.particles {
            paths.entry(p.id).or_default().push((p.position.re, 0.0 - p.position.im));
        }
    }
    let pts = paths.values().flatten();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    let (w, h) = (span(x0, x1), span(y0, y1));
    let (mx, my) = (0.05 * w, 0.05 * h);
    let stroke = 0.004 * w.max(h);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        num(x0 - mx),
        num(y0 - my),
        num(w + 2.0 * mx),
        num(h + 2.0 * my)
    );
    for (k, (id, pts)) in paths.iter().enumerate() {
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if i == 0 { "M" } else { " L" }, num(*x), num(*y));
        }
        let _ = writeln!(
            out,
            r#"  <path id="p{id}" d="{d}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            num(stroke)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn num(v: f64) -> String {
    format!("{v:.9e}")
}
