//! End-to-end runs of the `impulse-game` binary on the shipped configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Copies a shipped config into a fresh directory, redirecting its output
/// there and applying `key = value` overrides.
fn staged(name: &str, overrides: &[(&str, &str)]) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_dir().join(name)).unwrap();
    let mut lines: Vec<String> = text
        .lines()
        .filter(|l| {
            let key = l.split('=').next().unwrap_or("").trim();
            key != "output_dir" && !overrides.iter().any(|(k, _)| *k == key)
        })
        .map(String::from)
        .collect();
    lines.push(format!("output_dir = {}", dir.path().join("out").display()));
    lines.extend(overrides.iter().map(|(k, v)| format!("{k} = {v}")));
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, lines.join("\n") + "\n").unwrap();
    (dir, cfg)
}

fn run(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impulse-game"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn assert_first_thresholds(cfg_name: &str, overrides: &[(&str, &str)], expected: [f64; 4]) {
    let (dir, cfg) = staged(cfg_name, overrides);
    let out = run(&["solve"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/thresholds.csv"));
    assert_eq!(header, ["t", "ell1", "alpha", "beta", "ell2"]);
    assert_eq!(num(&rows[0][0]), 0.0);
    for (cell, e) in rows[0][1..].iter().zip(expected) {
        assert!((num(cell) - e).abs() < 1e-2, "{cell} vs {e}");
    }
    let times: Vec<f64> = rows.iter().map(|r| num(&r[0])).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*times.last().unwrap(), 1.0);
}

#[test]
fn solve_reference_first_row() {
    assert_first_thresholds("reference.cfg", &[], [3.3822, 4.5111, 5.5731, 7.0305]);
}

#[test]
fn solve_w2_one_first_row() {
    assert_first_thresholds("reference_w2_1.cfg", &[], [2.0468, 3.8380, 6.5116, 8.8240]);
}

#[test]
fn solve_output_is_byte_identical() {
    let (dir, cfg) = staged("reference.cfg", &[("n_steps", "512")]);
    assert!(run(&["solve"], &cfg).status.success());
    let first = fs::read(dir.path().join("out/coefficients.csv")).unwrap();
    assert!(run(&["solve"], &cfg).status.success());
    let second = fs::read(dir.path().join("out/coefficients.csv")).unwrap();
    assert_eq!(first, second);
    let header = String::from_utf8(first).unwrap();
    assert!(header.starts_with("t,p1,q1,n1,p2,q2,n2,a_x\n"));
}

#[test]
fn simulate_reference_events() {
    let (dir, cfg) = staged("reference.cfg", &[]);
    let out = run(&["simulate"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");

    let (header, events) = read_csv(&out_dir.join("events_8.csv"));
    assert_eq!(header, ["tau", "x_minus", "x_plus", "xi", "cost_p1", "cost_p2"]);
    assert_eq!(num(&events[0][0]), 0.0);
    assert!((num(&events[0][2]) - 5.5731).abs() < 1e-2);
    let (_, events) = read_csv(&out_dir.join("events_5.csv"));
    assert!(events.iter().all(|e| num(&e[0]) > 0.0));

    let (header, traj) = read_csv(&out_dir.join("trajectory_2.csv"));
    assert_eq!(header, ["t", "x", "u"]);
    assert_eq!(num(&traj[0][1]), 2.0);

    let bound = run(&["bound"], &cfg);
    let stdout = String::from_utf8(bound.stdout).unwrap();
    let k: usize = stdout.lines().next().unwrap().trim_start_matches("K = ").parse().unwrap();
    assert_eq!(k, 42);
    let (header, costs) = read_csv(&out_dir.join("costs.csv"));
    assert_eq!(header, ["x0", "J1", "J2", "n_events"]);
    assert_eq!(costs.len(), 3);
    assert!(costs.iter().all(|r| r[3].parse::<usize>().unwrap() <= k));
}

#[test]
fn simulate_w2_one_interior_start() {
    let (dir, cfg) = staged("reference_w2_1.cfg", &[]);
    assert!(run(&["simulate"], &cfg).status.success());
    let (_, events) = read_csv(&dir.path().join("out/events_6.csv"));
    assert!(events.iter().all(|e| num(&e[0]) > 0.0));
    let (_, events) = read_csv(&dir.path().join("out/events_10.csv"));
    assert!((num(&events[0][2]) - 6.5116).abs() < 1e-2);
}

#[test]
fn value_at_zero_shape() {
    let (dir, cfg) = staged("reference.cfg", &[("nx", "101")]);
    assert!(run(&["value", "--t", "0"], &cfg).status.success());
    let (header, rows) = read_csv(&dir.path().join("out/values_t0.csv"));
    assert_eq!(header, ["x0", "V1", "V2", "region"]);
    let x: Vec<f64> = rows.iter().map(|r| num(&r[0])).collect();
    let v1: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    let v2: Vec<f64> = rows.iter().map(|r| num(&r[2])).collect();
    let dx = x[1] - x[0];
    // |V2_x| <= max(c + sqrt(2 C p2), d + sqrt(2 D p2)) < 10 at t = 0.
    assert!(v2.windows(2).all(|w| (w[1] - w[0]).abs() <= 10.0 * dx));
    let max_v1_step = v1
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    assert!(max_v1_step > 0.5, "V1 should jump at the band edges");
    assert_eq!(rows[0][3], "below");
    assert_eq!(rows[50][3], "interior");
    assert_eq!(rows[100][3], "above");
}

#[test]
fn value_at_horizon_is_terminal_cost() {
    let (dir, cfg) = staged("reference.cfg", &[("nx", "11")]);
    assert!(run(&["value", "--t", "1"], &cfg).status.success());
    let (_, rows) = read_csv(&dir.path().join("out/values_t1.csv"));
    for r in rows {
        let x = num(&r[0]);
        assert!((num(&r[1]) - 0.5 * (x - 2.5) * (x - 2.5)).abs() < 1e-10);
        assert!((num(&r[2]) - 0.5 * (x - 5.0) * (x - 5.0)).abs() < 1e-10);
    }
}

#[test]
fn verify_shipped_configs_pass() {
    for name in ["reference.cfg", "reference_w2_1.cfg"] {
        let (dir, cfg) = staged(name, &[]);
        let out = run(&["verify"], &cfg);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        let (header, rows) = read_csv(&dir.path().join("out/report.csv"));
        assert_eq!(header, ["condition", "passed", "worst", "bound", "t", "x"]);
        assert!(rows.iter().all(|r| r[1] == "true"));
        let (_, nodes) = read_csv(&dir.path().join("out/report_nodes.csv"));
        assert_eq!(nodes.len(), 200 * 200);
    }
}

#[test]
fn verify_tiny_fixed_cost_fails_with_named_condition() {
    let (_dir, cfg) = staged("reference.cfg", &[("D", "1e-6")]);
    let out = run(&["verify"], &cfg);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("band_resolution"), "{stderr}");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.cfg");
    fs::write(&empty, "").unwrap();
    let out = run(&["solve"], &empty);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x_hi"));

    let (_d, cfg) = staged("reference.cfg", &[("x_lo", "5"), ("x_hi", "5")]);
    assert_eq!(run(&["bound"], &cfg).status.code(), Some(1));

    let (_d, cfg) = staged("reference.cfg", &[("bogus", "1")]);
    let out = run(&["solve"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let (_d, cfg) = staged("reference.cfg", &[]);
    assert_eq!(run(&["value", "--t", "1.5"], &cfg).status.code(), Some(1));
}

#[test]
fn degenerate_model_exits_two() {
    let (_d, cfg) = staged("reference.cfg", &[("b", "0")]);
    let out = run(&["solve"], &cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
