//! Text artifacts: CSV tables, JSON summaries and plot data.
//!
//! Every artifact starts with the provenance header (config hash, grid
//! parameters, seeds) so no file can be separated from the run that made it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::experiments::ExperimentReport;

/// Significant digits of every decimal value written to a table.
pub const DIGITS: usize = 12;

/// `%.12g`: shortest of fixed/scientific with 12 significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    fmt_g(x, DIGITS)
}

pub fn fmt_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Provenance attached to every artifact of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub entries: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Provenance { command: command.into(), config_hash: config_hash.into(), seed, entries: BTreeMap::new() }
    }

    fn header(&self, comment: &str, report: Option<&ExperimentReport>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{comment} twistlab {}", self.command);
        let _ = writeln!(s, "{comment} config_hash = {}", self.config_hash);
        let _ = writeln!(s, "{comment} seed = {}", self.seed);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{comment} {k} = {v}");
        }
        if let Some(r) = report {
            let _ = writeln!(s, "{comment} report = {}", r.tag);
            for (k, v) in &r.provenance {
                let _ = writeln!(s, "{comment} {k} = {v}");
            }
        }
        s
    }
}

/// Comma-separated table: `#` provenance lines, one header row, then the rows.
pub fn to_csv(report: &ExperimentReport, prov: &Provenance) -> String {
    let mut s = prov.header("#", Some(report));
    s.push_str(&report.columns.join(","));
    s.push('\n');
    for row in &report.rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_sig(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    provenance: &'a BTreeMap<String, String>,
    passed: bool,
    reports: &'a [ExperimentReport],
}

/// Pretty JSON summary of all reports of one command, with a trailing newline.
pub fn to_json(reports: &[ExperimentReport], prov: &Provenance) -> String {
    let passed = reports.iter().all(|r| r.passed());
    let summary =
        Summary { command: &prov.command, config_hash: &prov.config_hash, seed: prov.seed, provenance: &prov.entries, passed, reports };
    let mut s = serde_json::to_string_pretty(&summary).expect("reports serialise");
    s.push('\n');
    s
}

/// Data file plus a renderer-agnostic script describing the figure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    /// file stem, for example `envelope_main.decay`
    pub name: String,
    pub data: String,
    pub script: String,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// log-log (t, k) with t^{−1/2} and t^{−3/2} reference lines
    Decay,
    /// (t, ratio) with horizontal lines at the envelope constants
    Envelope,
}

const VALUE_COLUMNS: [&str; 6] = ["diag", "k", "norm", "k_hat", "q", "sup"];

/// Which figures a report supports, judged from its column names.
pub fn plot_kinds(report: &ExperimentReport) -> Vec<PlotKind> {
    let has = |c: &str| report.columns.iter().any(|x| x == c);
    let mut out = Vec::new();
    if has("t") && VALUE_COLUMNS.iter().any(|c| has(c)) {
        out.push(PlotKind::Decay);
    }
    if has("t") && has("ratio") {
        out.push(PlotKind::Envelope);
    }
    out
}

fn series_key(report: &ExperimentReport) -> Option<usize> {
    ["source", "pair"].iter().find_map(|c| report.columns.iter().position(|x| x == c))
}

/// Build the data and script for one figure.
pub fn emit_plot_data(report: &ExperimentReport, kind: PlotKind, prov: &Provenance) -> PlotFiles {
    let t_col = report.columns.iter().position(|c| c == "t");
    let (suffix, v_col, ylabel) = match kind {
        PlotKind::Decay => {
            let c = VALUE_COLUMNS.iter().find_map(|v| report.columns.iter().position(|x| x == v));
            ("decay", c, c.map(|j| report.columns[j].clone()).unwrap_or_else(|| "k".into()))
        }
        PlotKind::Envelope => ("envelope", report.columns.iter().position(|c| c == "ratio"), "ratio".to_string()),
    };
    let name = format!("{}.{suffix}", report.tag);
    let data_file = format!("{name}.dat");
    let mut data = prov.header("#", Some(report));
    let mut script = prov.header("#", Some(report));
    let mut warning = None;
    let rows: Vec<&Vec<f64>> = match (t_col, v_col) {
        (Some(_), Some(_)) => report.rows.iter().collect(),
        _ => Vec::new(),
    };
    if rows.is_empty() {
        warning = Some(format!("report {} has no ({}, {ylabel}) samples; empty data file written", report.tag, "t"));
        let _ = writeln!(script, "warning \"{}\"", warning.as_deref().unwrap_or_default());
        let _ = writeln!(script, "data \"{data_file}\"");
        return PlotFiles { name, data, script, warning };
    }
    let (tj, vj) = (t_col.unwrap(), v_col.unwrap());
    let key = series_key(report);
    let _ = writeln!(data, "series,t,{ylabel}");
    for r in &rows {
        let s = key.map_or(0.0, |k| r[k]);
        let _ = writeln!(data, "{},{},{}", fmt_sig(s), fmt_sig(r[tj]), fmt_sig(r[vj]));
    }
    let mut series: Vec<f64> = rows.iter().map(|r| key.map_or(0.0, |k| r[k])).collect();
    series.sort_by(f64::total_cmp);
    series.dedup();
    let _ = writeln!(script, "data \"{data_file}\" columns series t {ylabel}");
    match kind {
        PlotKind::Decay => {
            let _ = writeln!(script, "axes x=log y=log");
            let _ = writeln!(script, "label x \"t\" y \"{ylabel}\"");
            for s in &series {
                let _ = writeln!(script, "series {} x=t y={ylabel} style=points", fmt_sig(*s));
            }
            // reference lines through the first sample
            let (t0, v0) = rows.iter().map(|r| (r[tj], r[vj])).find(|&(_, v)| v > 0.0).unwrap_or((1.0, 1.0));
            for slope in [-0.5, -1.5] {
                let _ = writeln!(script, "powerline slope={slope} through=({},{}) label=\"t^{slope}\"", fmt_sig(t0), fmt_sig(v0));
            }
        }
        PlotKind::Envelope => {
            let _ = writeln!(script, "axes x=log y=linear");
            let _ = writeln!(script, "label x \"t\" y \"ratio\"");
            for s in &series {
                let _ = writeln!(script, "series {} x=t y=ratio style=points", fmt_sig(*s));
            }
            for (k, v) in report.envelopes.iter().filter(|(k, _)| k.starts_with("c_")) {
                if v.is_finite() {
                    let _ = writeln!(script, "hline y={} label=\"{k}\"", fmt_sig(*v));
                    if *k == "c_emp" && *v > 0.0 {
                        let _ = writeln!(script, "hline y={} label=\"1/{k}\"", fmt_sig(1.0 / v));
                    }
                }
            }
        }
    }
    PlotFiles { name, data, script, warning }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(19.7392088022), "19.7392088022");
        assert_eq!(fmt_sig(2.0 * std::f64::consts::PI * std::f64::consts::PI), "19.7392088022");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(1e-7), "1e-07");
        assert_eq!(fmt_sig(-1.234567890123456e-9), "-1.23456789012e-09");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(f64::NAN), "nan");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
    }

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("envelope_main", &["t", "source", "diag", "ratio"]);
        for t in [1.0, 2.0, 4.0] {
            r.push_row(vec![t, 0.0, t.powf(-1.5), 0.5]);
        }
        r.set_envelope("c_emp", 2.0);
        r
    }

    #[test]
    fn csv_has_provenance_and_header() {
        let prov = Provenance::new("kernel3d", "abc", 7);
        let csv = to_csv(&sample(), &prov);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert!(csv.contains("# config_hash = abc"));
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "t,source,diag,ratio");
        assert!(csv.contains("\n2,0,0.353553390593,0.5\n"));
    }

    #[test]
    fn plots_for_decay_envelope_and_empty() {
        let prov = Provenance::new("kernel3d", "abc", 7);
        let r = sample();
        assert_eq!(plot_kinds(&r), vec![PlotKind::Decay, PlotKind::Envelope]);
        let d = emit_plot_data(&r, PlotKind::Decay, &prov);
        assert!(d.script.contains("slope=-0.5") && d.script.contains("slope=-1.5"));
        assert!(d.data.contains("0,4,0.125"));
        let e = emit_plot_data(&r, PlotKind::Envelope, &prov);
        assert!(e.script.contains("hline y=2 label=\"c_emp\""));
        assert!(e.script.contains("hline y=0.5 label=\"1/c_emp\""));
        let empty = ExperimentReport::new("envelope_main", &["t", "diag", "ratio"]);
        let p = emit_plot_data(&empty, PlotKind::Decay, &prov);
        assert!(p.warning.is_some());
        assert!(p.data.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn json_is_deterministic() {
        let prov = Provenance::new("kernel3d", "abc", 7);
        let a = to_json(&[sample()], &prov);
        let b = to_json(&[sample()], &prov);
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["reports"][0]["tag"], "envelope_main");
    }
}
