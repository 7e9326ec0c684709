//! End-to-end runs of the `cobound` binary: exit codes, config handling and
//! reproducibility across worker counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_cobound");

fn run(args: &[&str], out: &Path) -> i32 {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Every report file with the timestamp line removed, keyed by name.
fn reports(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("# timestamp-unix:")).collect();
            (path.file_name().unwrap().to_string_lossy().into_owned(), kept.join("\n"))
        })
        .collect();
    out.sort();
    out
}

#[test]
fn successful_runs_exit_zero_and_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["check"], &out), 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["rng_scheme"], "chacha8-site-v1");
    let csv = fs::read_to_string(out.join("conditions.csv")).unwrap();
    assert!(csv.starts_with("# cobound check"));
    assert!(csv.contains("# timestamp-unix:"));
    assert!(csv.contains("# seed: 0"));
    assert!(csv.contains("rule = \"unit\""));
}

#[test]
fn config_problems_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let unknown = write_config(tmp.path(), "unknown.toml", "[run]\nreps = 4\n");
    assert_eq!(run(&["wip", "--config", unknown.to_str().unwrap()], &out), 2);
    let mismatch = write_config(tmp.path(), "mismatch.toml", "command = \"tails\"\n");
    assert_eq!(run(&["wip", "--config", mismatch.to_str().unwrap()], &out), 2);
    let bad_rule = write_config(tmp.path(), "rule.toml", "[field]\nrule = \"geometric\"\nrho = [1.5]\n");
    assert_eq!(run(&["check", "--config", bad_rule.to_str().unwrap()], &out), 2);
    assert_eq!(run(&["check", "--cutoff-ladder", "2^x"], &out), 2);
    // moment bound needs an orthomartingale difference field
    let ma = write_config(tmp.path(), "ma.toml", "[field]\ncoefficients = [{ index = [0], value = 1.0 }, { index = [1], value = 1.0 }]\n");
    assert_eq!(run(&["moments", "--config", ma.to_str().unwrap()], &out), 2);
}

#[test]
fn missing_files_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["wip", "--config", "/nonexistent/cobound.toml"], &tmp.path().join("out")), 1);
    let blocked = tmp.path().join("file");
    fs::write(&blocked, "").unwrap();
    assert_eq!(run(&["check"], &blocked.join("sub")), 1);
}

#[test]
fn failed_checks_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let strict = write_config(tmp.path(), "strict.toml", "[run]\ntolerance = 0.0\n");
    assert_eq!(run(&["decompose", "--config", strict.to_str().unwrap()], &out), 3);
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"violation\""));
}

#[test]
fn oversized_runs_exit_four() {
    let tmp = tempfile::tempdir().unwrap();
    let big = write_config(tmp.path(), "big.toml", "[run]\nn = [1048576, 1048576]\nreplications = 2\n");
    assert_eq!(run(&["simulate", "--config", big.to_str().unwrap()], &tmp.path().join("out")), 4);
    let deep = write_config(tmp.path(), "deep.toml", "[field]\nrule = \"dyadic-spikes\"\ncutoff = 63\n");
    assert_eq!(run(&["decompose", "--config", deep.to_str().unwrap()], &tmp.path().join("out")), 4);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.toml",
        "seed = 7\nlaw = \"uniform\"\n[field]\ncoefficients = [{ index = [0, 0], value = 1.0 }, { index = [1, 2], value = -0.5 }]\n[run]\nn = [12, 12]\nreplications = 300\n",
    );
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["simulate", "--config", cfg, "--workers", "1"], &one), 0);
    assert_eq!(run(&["simulate", "--config", cfg, "--workers", "4"], &four), 0);
    let a = reports(&one);
    assert!(!a.is_empty());
    assert_eq!(a, reports(&four));
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", "seed = 1\n[run]\nn = [16]\nreplications = 20\n");
    let cfg = cfg.to_str().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(run(&["simulate", "--config", cfg], &a), 0);
    assert_eq!(run(&["simulate", "--config", cfg, "--seed", "1"], &b), 0);
    assert_eq!(run(&["simulate", "--config", cfg, "--seed", "2"], &c), 0);
    assert_eq!(reports(&a), reports(&b));
    assert_ne!(reports(&a), reports(&c));
}
