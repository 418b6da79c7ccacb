use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const INTERVAL: &str = r#"{"dimension": 1, "bbox": [[0, 1]], "shape": {"type": "box", "lo": [0], "hi": [1]}}"#;
const DISK: &str = r#"{"dimension": 2, "bbox": [[-1, 1], [-1, 1]], "shape": {"type": "ball", "center": [0, 0], "radius": 1}}"#;

struct Case {
    dir: TempDir,
    config: PathBuf,
}

impl Case {
    fn new(config: &str) -> Case {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, config).unwrap();
        Case { dir, config: path }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, sub: &str, out: &str, extra: &[&str]) -> i32 {
        let status = Command::new(env!("CARGO_BIN_EXE_besovlab"))
            .arg(sub)
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.out(out))
            .args(extra)
            .env_remove("SPECTRAL_BESOV_OUT")
            .status()
            .unwrap();
        status.code().unwrap()
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn minimal() -> String {
    format!(r#"{{"domain": {INTERVAL}, "h": [0.0625], "checks": [{{"kind": "resolution-identity", "homogeneous": false}}]}}"#)
}

#[test]
fn minimal_config_passes_with_one_row() {
    let case = Case::new(&minimal());
    assert_eq!(case.run("run", "out", &[]), 0);
    let verify = rows(&read(&case.out("out").join("verify.csv")));
    assert_eq!(verify.len(), 1);
    assert_eq!(verify[0][0], "resolution-identity");
    assert_eq!(verify[0][3], "true");
    let m = manifest(&case.out("out"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    for name in ["spectrum.csv", "norms.csv", "profiles.csv"] {
        assert!(case.out("out").join(name).exists(), "{name}");
    }
}

#[test]
fn index_constraint_exits_2_in_assert_mode() {
    let config = format!(
        r#"{{"domain": {DISK}, "h": [0.25], "potential": {{"expr": "0.5/r^2"}},
            "checks": [{{"kind": "equivalence", "s": 1.5, "p": 2, "q": 2}}]}}"#
    );
    let case = Case::new(&config);
    assert_eq!(case.run("verify", "strict", &["--assert"]), 2);
    let m = manifest(&case.out("strict"));
    assert_eq!(m["exit_code"], 2);
    assert!(m["reason"].as_str().unwrap().contains("index constraint"));
    // Nothing was computed.
    assert!(!case.out("strict").join("verify.csv").exists());

    assert_eq!(case.run("verify", "report", &["--report-only"]), 0);
    let verify = read(&case.out("report").join("verify.csv"));
    assert!(rows(&verify).iter().any(|r| r[1].starts_with("norm-ratio-spread") && r[3].is_empty()));
}

#[test]
fn invalid_config_exits_2_and_writes_manifest() {
    let case = Case::new(&minimal().replace("\"h\"", "\"spacing\": 1, \"h\""));
    assert_eq!(case.run("run", "out", &[]), 2);
    let m = manifest(&case.out("out"));
    assert!(m["reason"].as_str().unwrap().contains("spacing"));

    let case = Case::new("{ not json");
    assert_eq!(case.run("spectrum", "out", &[]), 2);
    assert_eq!(manifest(&case.out("out"))["exit_code"], 2);
}

#[test]
fn budget_exits_3() {
    let case = Case::new(&minimal());
    assert_eq!(case.run("run", "out", &["--dense-cap", "8"]), 3);
    assert!(manifest(&case.out("out"))["reason"].as_str().unwrap().contains("dense cap"));
}

#[test]
fn failing_check_exits_1_unless_report_only() {
    let case = Case::new(&minimal().replace("\"homogeneous\": false", "\"homogeneous\": false, \"tolerance\": 1e-30"));
    assert_eq!(case.run("verify", "a", &[]), 1);
    let m = manifest(&case.out("a"));
    assert_eq!(m["checks"][0]["pass"], false);
    assert_eq!(case.run("verify", "b", &["--report-only"]), 0);
}

#[test]
fn spectrum_matches_closed_form() {
    let case = Case::new(&format!(r#"{{"domain": {INTERVAL}, "h": [0.03125, 0.015625]}}"#));
    assert_eq!(case.run("spectrum", "out", &[]), 0);
    let table = rows(&read(&case.out("out").join("spectrum.csv")));
    assert_eq!(table.len(), 31 + 63);
    for r in &table {
        let (h, k, lam): (f64, f64, f64) = (r[0].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        let exact = 4.0 / (h * h) * (k * std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((lam - exact).abs() <= 1e-10 * exact, "h={h} k={k}: {lam} vs {exact}");
    }
}

#[test]
fn profiles_sum_to_one() {
    let config = format!(r#"{{"domain": {DISK}, "h": [0.125], "profile": {{"bump_power": 2}}}}"#);
    let case = Case::new(&config);
    assert_eq!(case.run("profiles", "out", &[]), 0);
    let table = rows(&read(&case.out("out").join("profiles.csv")));
    let sums: Vec<f64> = table.iter().filter(|r| r[2] == "sum").map(|r| r[3].parse().unwrap()).collect();
    assert!(!sums.is_empty());
    for (r, s) in table.iter().filter(|r| r[2] == "sum").zip(&sums) {
        assert!(r[1].parse::<f64>().unwrap() > 0.0);
        assert!((s - 1.0).abs() <= 1e-14, "{s}");
    }
}

#[test]
fn repeated_runs_are_identical_and_reuse_the_cache() {
    let config = format!(
        r#"{{"domain": {INTERVAL}, "h": [0.0625, 0.03125], "potential": {{"expr": "20*x*(1-x)"}},
            "norms": [{{"kind": "besov", "s": 1, "p": "inf", "q": 1}}, {{"kind": "lorentz", "p": 3, "q": 2}}],
            "family": {{"tag": "indicator", "count": 4}},
            "checks": [{{"kind": "bernstein", "pairs": [[1, "inf"]], "alphas": [0]}}],
            "seed": 5}}"#
    );
    let case = Case::new(&config);
    assert_eq!(case.run("run", "a", &[]), 0);
    assert_eq!(case.run("run", "b", &[]), 0);
    for name in ["spectrum.csv", "norms.csv", "verify.csv", "profiles.csv"] {
        let a = spectral_besov::run::strip_timing(&read(&case.out("a").join(name)), name);
        let b = spectral_besov::run::strip_timing(&read(&case.out("b").join(name)), name);
        assert_eq!(a, b, "{name}");
    }
    assert!(manifest(&case.out("a"))["levels"].as_array().unwrap().iter().all(|l| l["cached"] == false));
    assert_eq!(case.run("run", "a", &[]), 0);
    assert!(manifest(&case.out("a"))["levels"].as_array().unwrap().iter().all(|l| l["cached"] == true));

    assert_eq!(case.run("norms", "c", &["--seed", "6"]), 0);
    let c = read(&case.out("c").join("norms.csv"));
    assert_ne!(c, read(&case.out("a").join("norms.csv")));
}

#[test]
fn output_dir_env_override() {
    let case = Case::new(&format!(r#"{{"domain": {INTERVAL}, "h": [0.125], "output_dir": "ignored"}}"#));
    let target = case.out("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_besovlab"))
        .args(["spectrum", "--config"])
        .arg(&case.config)
        .env("SPECTRAL_BESOV_OUT", &target)
        .current_dir(case.dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(target.join("spectrum.csv").exists());
    assert!(!case.out("ignored").exists());
}

#[test]
fn bench_error_decays_with_degree() {
    let config = format!(r#"{{"domain": {INTERVAL}, "h": [0.0078125], "bench": {{"degrees": [64, 128, 256, 512, 1024]}}}}"#);
    let case = Case::new(&config);
    assert_eq!(case.run("bench", "out", &[]), 0);
    let table = rows(&read(&case.out("out").join("bench.csv")));
    let paths: Vec<&str> = table.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(&paths[..2], ["dense-setup", "dense-apply"]);
    let errs: Vec<f64> = table.iter().filter(|r| r[3] == "chebyshev").map(|r| r[6].parse().unwrap()).collect();
    assert_eq!(errs.len(), 5);
    assert!(errs.last().unwrap() < &(1e-3 * errs[0]), "{errs:?}");
}

#[test]
fn kernels_are_written_on_request() {
    let config = format!(r#"{{"domain": {INTERVAL}, "h": [0.125], "kernels": {{"heat": [0.01], "blocks": [2]}}}}"#);
    let case = Case::new(&config);
    assert_eq!(case.run("run", "out", &[]), 0);
    let dir = case.out("out").join("kernels");
    let heat = rows(&read(&dir.join("heat-t0.01-level0.csv")));
    assert_eq!(heat.len(), 49);
    assert!(dir.join("block-j2-level0.csv").exists());
}

#[test]
fn full_interval_suite_passes() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/full-interval.json");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_besovlab"))
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    let m = manifest(dir.path());
    assert_eq!(status.code(), Some(0), "{}", m["reason"]);
    assert_eq!(m["checks"].as_array().unwrap().len(), 13);
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}
