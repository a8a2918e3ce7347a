use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twistlab"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("twistlab-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn square_eigenvalue() {
    let out = scratch("eigen");
    let o = run(&["eigen", "--shape", "square", "--beta", "0", "--h", "0.015625", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("eigen.eigen.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("# twistlab eigen"));
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "j,E,continuum,rel_err");
    let first: Vec<f64> = csv.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((first[1] - exact).abs() / exact < 0.01, "E1 = {}", first[1]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eigen.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    assert!(csv.contains(json["config_hash"].as_str().unwrap()));
}

#[test]
fn same_seed_gives_identical_files() {
    let args = |d: &Path| {
        let mut v: Vec<String> = ["nash", "--seed", "7", "--beta", "3", "--set", "nash.half_length=4"].iter().map(|s| s.to_string()).collect();
        v.extend(["--out".to_string(), d.display().to_string()]);
        v
    };
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for d in [&a, &b] {
        let o = bin().args(args(d)).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ca, cb) = (dir_contents(&a), dir_contents(&b));
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);

    let c = scratch("det-c");
    let mut other = args(&c);
    other[2] = "8".into();
    assert_eq!(bin().args(other).output().unwrap().status.code(), Some(0));
    let cc = dir_contents(&c);
    assert_ne!(ca, cc);
}

#[test]
fn output_dir_and_workers_do_not_change_the_hash() {
    let (a, b) = (scratch("hash-a"), scratch("hash-b"));
    for (d, w) in [(&a, "1"), (&b, "2")] {
        let o = run(&["eigen", "--shape", "square", "--beta", "0", "--h", "0.03125", "--workers", w, "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(a.join("eigen.json")).unwrap(), fs::read(b.join("eigen.json")).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--set", "geometry.bogus=1"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--set", "novalue"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--h", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--config", "/nonexistent/twistlab.toml"]).status.code(), Some(2));
    assert_eq!(run(&["nash", "--beta", "0"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    let out = scratch("fail");
    let o = run(&["nash", "--beta", "3", "--set", "nash.trials=5", "--set", "nash.half_length=4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn config_round_trips_through_toml() {
    let d = scratch("config");
    let o = run(&["config", "--shape", "disc", "--a", "0.6", "--beta", "2", "--seed", "11", "--set", "kernel3d.times=[1.0, 2.0]"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("shape = \"disc\""));
    let file = d.join("run.toml");
    fs::write(&file, &text).unwrap();
    let again = run(&["config", "--config", file.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    let over = run(&["config", "--config", file.to_str().unwrap(), "--seed", "12"]);
    assert!(String::from_utf8(over.stdout).unwrap().contains("seed = 12"));
}

#[test]
fn report_aggregates_summaries() {
    let out = scratch("report");
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["eigen", "--shape", "square", "--beta", "0", "--h", "0.03125", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["kernel1d", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["passed"], true);
    let cmds: Vec<&str> = s["commands"].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(cmds, ["eigen", "kernel1d"]);
    assert!(s["checks"].as_array().unwrap().iter().any(|c| c["criterion"] == "5"));
    let again = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
}

#[test]
fn plots_are_written_unless_disabled() {
    let (a, b) = (scratch("plots-a"), scratch("plots-b"));
    assert_eq!(run(&["kernel1d", "--out", a.to_str().unwrap()]).status.code(), Some(0));
    let script = fs::read_to_string(a.join("plots/kernel1d.kernel1d.decay.plot")).unwrap();
    assert!(script.contains("slope=-0.5") && script.contains("slope=-1.5"));
    assert!(script.contains("data \"kernel1d.kernel1d.decay.dat\""));
    let env = fs::read_to_string(a.join("plots/kernel1d.kernel1d.envelope.plot")).unwrap();
    assert!(env.contains("hline"));
    assert_eq!(run(&["kernel1d", "--no-plots", "--out", b.to_str().unwrap()]).status.code(), Some(0));
    assert!(!b.join("plots").exists());
}
