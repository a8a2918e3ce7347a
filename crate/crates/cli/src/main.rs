//! `twistlab`: command-line driver for the heat-kernel experiments.
//!
//! Exit codes: 0 all checks pass, 1 a check failed (or the run aborted),
//! 2 usage or configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use twistlab::config::RunConfig;
use twistlab::experiments::ExperimentReport;
use twistlab::report::{emit_plot_data, plot_kinds, to_csv, to_json, Provenance};
use twistlab::suite::{self, Command};
use twistlab::LabError;

#[derive(Parser, Debug)]
#[command(name = "twistlab", version, about = "Dirichlet heat kernels of twisted tubes: numerical experiments")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// cross-section shape: ellipse, square, rectangle or disc
    #[arg(long, global = true)]
    shape: Option<String>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    b: Option<f64>,
    /// cross-section mesh width
    #[arg(long, global = true)]
    h: Option<f64>,
    /// twist amplitude β (0 for a straight tube)
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// twist support radius R
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// truncation half-length L
    #[arg(long = "L", global = true)]
    half_length: Option<f64>,
    #[arg(long, global = true)]
    h3: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (default: available parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// skip plot data and scripts
    #[arg(long, global = true)]
    no_plots: bool,
    /// arbitrary override `section.key=value` (value in TOML syntax)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// cross-section eigenvalues
    Eigen,
    /// one-dimensional kernels
    Kernel1d,
    /// reference operator kernel and ratio trajectories
    Refkernel,
    /// full heat-kernel diagonals and envelopes
    Kernel3d,
    /// Green-function ratios and harmonic profiles
    Greens,
    /// Nash inequalities and C_κ tables
    Nash,
    /// Hardy constants
    Hardy,
    /// eigenvalue counts and the Lieb ratio
    Spectral,
    /// Sobolev constants and failure probes
    Sobolev,
    /// Brownian-bridge Monte Carlo
    Mc,
    /// weighted and L¹–L^∞ decay rates, mixed off-diagonal bounds
    Decay,
    /// straight tube with a bump potential
    Perturb,
    /// aggregate the JSON summaries of the output directory
    Report,
    /// print the effective configuration as TOML
    Config,
}

impl Cmd {
    fn experiment(self) -> Option<Command> {
        Some(match self {
            Cmd::Eigen => Command::Eigen,
            Cmd::Kernel1d => Command::Kernel1d,
            Cmd::Refkernel => Command::Refkernel,
            Cmd::Kernel3d => Command::Kernel3d,
            Cmd::Greens => Command::Greens,
            Cmd::Nash => Command::Nash,
            Cmd::Hardy => Command::Hardy,
            Cmd::Spectral => Command::Spectral,
            Cmd::Sobolev => Command::Sobolev,
            Cmd::Mc => Command::Mc,
            Cmd::Decay => Command::Decay,
            Cmd::Perturb => Command::Perturb,
            Cmd::Report | Cmd::Config => return None,
        })
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) | LabError::Geometry(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Run(format!("{}: {e}", path.display()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), Failure> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::Usage(format!("malformed override key `{key}`")));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| Failure::Usage(format!("`{p}` in `{key}` is not a table")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Config file, then the named flags, then `--set` overrides.
fn load_config(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut table = match &o.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let named: [(&str, Option<toml::Value>); 12] = [
        ("geometry.shape", o.shape.clone().map(toml::Value::String)),
        ("geometry.a", o.a.map(toml::Value::Float)),
        ("geometry.b", o.b.map(toml::Value::Float)),
        ("geometry.h", o.h.map(toml::Value::Float)),
        ("geometry.beta", o.beta.map(toml::Value::Float)),
        ("geometry.radius", o.radius.map(toml::Value::Float)),
        ("geometry.half_length", o.half_length.map(toml::Value::Float)),
        ("geometry.h3", o.h3.map(toml::Value::Float)),
        ("seed", o.seed.map(|s| toml::Value::Integer(s as i64))),
        ("solver.workers", o.workers.map(|w| toml::Value::Integer(w as i64))),
        ("output.dir", o.out.as_ref().map(|p| toml::Value::String(p.display().to_string()))),
        ("output.plots", o.no_plots.then_some(toml::Value::Boolean(false))),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            set_path(&mut table, k, v)?;
        }
    }
    for s in &o.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Failure::Usage(format!("configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// The configuration as recorded in artifacts: output location and thread count removed.
fn recorded_config(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    let obj = v.as_object_mut().expect("config object");
    obj.remove("output");
    if let Some(s) = obj.get_mut("solver").and_then(|s| s.as_object_mut()) {
        s.remove("workers");
    }
    v
}

fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(&recorded_config(cfg)).expect("config serialises");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn print_checks(reports: &[ExperimentReport]) {
    for r in reports {
        let crit = r.provenance.get("criterion").map(String::as_str).unwrap_or("-");
        for c in &r.checks {
            println!("{} [{crit}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.criterion, c.detail);
        }
        for w in &r.warnings {
            eprintln!("warning [{}]: {w}", r.tag);
        }
    }
}

fn run_experiment(command: Command, cfg: &RunConfig) -> Result<bool, Failure> {
    let hash = config_hash(cfg);
    let reports = suite::run(command, cfg)?;
    let out = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut prov = Provenance::new(command.name(), &hash, cfg.seed);
    prov.entries.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut stems = Vec::new();
    for r in &reports {
        let n = seen.entry(r.tag.clone()).or_insert(0);
        stems.push(if *n == 0 { format!("{}.{}", command.name(), r.tag) } else { format!("{}.{}.{n}", command.name(), r.tag) });
        *n += 1;
    }
    for (r, stem) in reports.iter().zip(&stems) {
        write(&out.join(format!("{stem}.csv")), &to_csv(r, &prov))?;
    }
    let mut json_prov = prov.clone();
    json_prov.entries.insert("config".into(), serde_json::to_string(&recorded_config(cfg)).expect("config serialises"));
    write(&out.join(format!("{}.json", command.name())), &to_json(&reports, &json_prov))?;
    if cfg.output.plots {
        let dir = out.join("plots");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        for (r, stem) in reports.iter().zip(&stems) {
            for kind in plot_kinds(r) {
                let p = emit_plot_data(r, kind, &prov);
                let base = format!("{stem}.{}", p.name.rsplit('.').next().unwrap_or("plot"));
                write(&dir.join(format!("{base}.dat")), &p.data)?;
                write(&dir.join(format!("{base}.plot")), &p.script.replace(&format!("{}.dat", p.name), &format!("{base}.dat")))?;
                if let Some(w) = p.warning {
                    eprintln!("warning: {w}");
                }
            }
        }
    }
    print_checks(&reports);
    Ok(reports.iter().all(|r| r.passed()))
}

#[derive(Serialize)]
struct SummaryRow {
    command: String,
    report: String,
    criterion: String,
    check: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct Summary {
    passed: bool,
    commands: BTreeMap<String, String>,
    checks: Vec<SummaryRow>,
}

fn aggregate(cfg: &RunConfig) -> Result<bool, Failure> {
    let out = PathBuf::from(&cfg.output.dir);
    let mut files: Vec<PathBuf> = fs::read_dir(&out)
        .map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_stem().is_some_and(|s| s != "summary"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Usage(format!("no JSON reports in {}", out.display())));
    }
    let mut summary = Summary { passed: true, commands: BTreeMap::new(), checks: Vec::new() };
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| io_err(f, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Run(format!("{}: {e}", f.display())))?;
        let command = v["command"].as_str().unwrap_or("?").to_string();
        summary.commands.insert(command.clone(), v["config_hash"].as_str().unwrap_or("").to_string());
        for r in v["reports"].as_array().into_iter().flatten() {
            let report = r["tag"].as_str().unwrap_or("?").to_string();
            let criterion = r["provenance"]["criterion"].as_str().unwrap_or("-").to_string();
            for c in r["checks"].as_array().into_iter().flatten() {
                let pass = c["pass"].as_bool().unwrap_or(false);
                summary.passed &= pass;
                summary.checks.push(SummaryRow {
                    command: command.clone(),
                    report: report.clone(),
                    criterion: criterion.clone(),
                    check: c["criterion"].as_str().unwrap_or("?").to_string(),
                    pass,
                    detail: c["detail"].as_str().unwrap_or("").to_string(),
                });
            }
        }
    }
    for c in &summary.checks {
        println!("{} {} [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.command, c.criterion, c.check, c.detail);
    }
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    write(&out.join("summary.json"), &text)?;
    Ok(summary.passed)
}

fn configure_workers(cfg: &RunConfig) {
    let n = cfg.solver.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    // a second initialisation only happens in-process and keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.opts).and_then(|cfg| {
        configure_workers(&cfg);
        match cli.command.experiment() {
            Some(c) => run_experiment(c, &cfg),
            None if cli.command == Cmd::Report => aggregate(&cfg),
            None => {
                print!("{}", toml::to_string_pretty(&cfg).map_err(|e| Failure::Run(e.to_string()))?);
                Ok(true)
            }
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values_parse_as_toml_or_string() {
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("[1.0, 2.5]").as_array().unwrap().len(), 2);
        assert_eq!(parse_value("square"), toml::Value::String("square".into()));
        let mut t = toml::Table::new();
        set_path(&mut t, "kernel3d.window", parse_value("[2.0, 8.0]")).unwrap();
        set_path(&mut t, "seed", parse_value("5")).unwrap();
        let cfg: RunConfig = t.clone().try_into().unwrap();
        assert_eq!(cfg.kernel3d.window, [2.0, 8.0]);
        assert_eq!(cfg.seed, 5);
        assert!(set_path(&mut t, "seed.x", parse_value("1")).is_err());
        assert!(set_path(&mut t, "a..b", parse_value("1")).is_err());
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        b.solver.workers = Some(3);
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
