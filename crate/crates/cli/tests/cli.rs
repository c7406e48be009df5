//! End-to-end checks of the installed binary: exit codes, output formats,
//! config-file precedence, and byte-level determinism of reruns.

use std::path::PathBuf;
use std::process::Command;

struct RunResult {
    stdout: Vec<u8>,
    stderr: String,
    code: i32,
}

fn rbm(args: &[&str]) -> RunResult {
    let out = Command::new(env!("CARGO_BIN_EXE_rbm"))
        .args(args)
        .output()
        .expect("binary runs");
    RunResult {
        stdout: out.stdout,
        stderr: String::from_utf8(out.stderr).expect("stderr is utf8"),
        code: out.status.code().expect("no signal"),
    }
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rbm_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("mkdir");
    dir
}

#[test]
fn rate_alpha_grid_hits_zero_exactly() {
    let r = rbm(&["rate", "--alpha-grid", "-5:5:101"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let text = String::from_utf8(r.stdout).unwrap();
    let data: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("alpha"))
        .collect();
    assert_eq!(data.len(), 101);
    // alpha = 0 lands on a grid point and V(0) = 0, V'(0) = 1/(2b) exactly
    assert!(text.contains(
        "0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1"
    ));
}

#[test]
fn rate_x_grid_vanishes_at_the_ergodic_mean() {
    // b = 2: the rate V* is zero with zero slope at x = 1/(2b) = 0.25
    let r = rbm(&["rate", "--b", "2", "--x-grid", "0:2:81"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let text = String::from_utf8(r.stdout).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("2.5000000000000000e-1,"))
        .expect("x = 0.25 row present");
    // the maximizer is found by a root solve, so allow solver-level slack
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert!(cols[1].abs() < 1e-10, "V* at the mean: {}", cols[1]);
    assert!(cols[2].abs() < 1e-10, "slope at the mean: {}", cols[2]);
    assert!(cols[3].abs() < 1e-10, "maximizer at the mean: {}", cols[3]);
}

#[test]
fn rate_requires_exactly_one_grid() {
    let none = rbm(&["rate", "--b", "1"]);
    assert_eq!(none.code, 2);
    assert!(none.stderr.contains("exactly one"));
    let both = rbm(&["rate", "--alpha-grid", "0:1:2", "--x-grid", "0:1:2"]);
    assert_eq!(both.code, 2);
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let args = [
        "simulate", "--paths", "300", "--t", "0.5", "--dt", "1e-3", "--seed", "9",
    ];
    let a = rbm(&args);
    let b = rbm(&args);
    assert_eq!(a.code, 0, "stderr: {}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn config_file_loses_to_explicit_flags() {
    let dir = tmp_dir("cfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "b=2\n# comment line\nt=0.25\n").unwrap();
    let r = rbm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--b",
        "1",
        "--paths",
        "50",
        "--dt",
        "1e-2",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let text = String::from_utf8(r.stdout).unwrap();
    // flag wins over config, config wins over default
    assert!(text.contains("\"b\": \"1\""));
    assert!(text.contains("\"t\": \"0.25\""));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tmp_dir("badkey");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "paths=10\nwalls=3\n").unwrap();
    let r = rbm(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("walls"));
}

#[test]
fn failed_verification_exits_one() {
    // dt = 1e-2 puts the step bias at roughly twenty standard errors for this
    // cell, so the verdict is a structural fail, not a coin flip.
    let dir = tmp_dir("fail");
    let r = rbm(&[
        "verify", "--suite", "laplace", "--alpha", "-1", "--lambda", "2",
        "--dt", "1e-2", "--paths", "10000", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 1, "stderr: {}", r.stderr);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("laplace: FAIL"));
    assert!(dir.join("laplace_42.json").exists());
    assert!(dir.join("laplace_42.csv").exists());
}

#[test]
fn unknown_suite_exits_two() {
    let r = rbm(&["verify", "--suite", "entropy"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("unknown suite"));
}

#[test]
fn exp_tilt_without_alpha_is_a_config_error() {
    let r = rbm(&["simulate", "--functional", "exp_tilt_L", "--paths", "10"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("alpha"));
}

#[test]
fn help_text_states_units() {
    let r = rbm(&["simulate", "--help"]);
    assert_eq!(r.code, 0);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("time units"));
    assert!(text.contains("space units"));
}

#[test]
fn dumped_paths_are_reproducible_csv() {
    let dir = tmp_dir("dump");
    let args = [
        "simulate", "--dump-paths", "2", "--t", "0.02", "--dt", "1e-3",
        "--seed", "5", "--out", dir.to_str().unwrap(),
    ];
    let r = rbm(&args);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let first: Vec<Vec<u8>> = ["path_5_0.csv", "path_5_1.csv"]
        .iter()
        .map(|n| std::fs::read(dir.join(n)).unwrap())
        .collect();
    // identical flags must rewrite identical bytes
    let r = rbm(&args);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    for (i, name) in ["path_5_0.csv", "path_5_1.csv"].iter().enumerate() {
        let again = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(first[i], again);
        let text = String::from_utf8(again).unwrap();
        assert!(text.lines().any(|l| l.starts_with("t,")));
        // 0.02 / 1e-3 steps plus the initial row
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 22);
    }
    // distinct path indices draw from distinct streams
    assert_ne!(first[0], first[1]);
}

#[test]
fn export_writes_both_datasets() {
    let dir = tmp_dir("export");
    let r = rbm(&[
        "export", "--alpha-grid", "-1:1:11", "--x-grid", "0:1:11",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let alpha = std::fs::read_to_string(dir.join("rate_alpha.csv")).unwrap();
    let x = std::fs::read_to_string(dir.join("rate_x.csv")).unwrap();
    assert!(alpha.lines().any(|l| l == "alpha,V,V_prime"));
    assert!(x.lines().any(|l| l == "x,V_star,V_star_prime,lambda_star"));
    assert_eq!(alpha.lines().filter(|l| !l.starts_with('#')).count(), 12);
    assert_eq!(x.lines().filter(|l| !l.starts_with('#')).count(), 12);
}
