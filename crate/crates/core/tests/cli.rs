use std::path::Path;
use std::process::{Command, Output};

use anchorreg::harness::eval::CSV_HEADER;
use anchorreg::trajectory::read_tum;

const FAST_CONFIG: &str = "inner_iters = 5\nouter_iters = 2\n";

fn anchorreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchorreg"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, frames: usize) -> String {
    let clip = dir.join("clip").to_string_lossy().into_owned();
    ok(&anchorreg(&[
        "synth",
        &clip,
        "--seed",
        "8",
        "--frames",
        &frames.to_string(),
        "--depth-sigma",
        "0.002",
    ]));
    std::fs::write(dir.join("fast.toml"), FAST_CONFIG).unwrap();
    clip
}

/// Column values of the single data row of a metrics CSV.
fn csv_row(stdout: &str) -> Vec<(String, String)> {
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row = lines.next().unwrap();
    CSV_HEADER
        .split(',')
        .map(String::from)
        .zip(row.split(',').map(String::from))
        .collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    row.iter().find(|(k, _)| k == name).unwrap().1.parse().unwrap()
}

#[test]
fn synth_register_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), 3);
    let out = dir.path().join("out");
    let config = dir.path().join("fast.toml");
    let stdout = ok(&anchorreg(&[
        "register",
        &clip,
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--descriptor",
        "oracle",
        "--frames",
        "3",
    ]));
    let row = csv_row(&stdout);
    assert_eq!(field(&row, "rot_acc5"), 100.0);

    let traj = read_tum(&out.join("trajectory.txt")).unwrap();
    let stamps: Vec<f64> = traj.iter().map(|s| s.timestamp).collect();
    assert_eq!(stamps, vec![0.0, 20.0, 40.0]);
    assert!(out.join("metrics.csv").exists() && out.join("metrics.json").exists());

    let gt = Path::new(&clip).join("groundtruth.txt");
    let stdout = ok(&anchorreg(&[
        "eval",
        out.join("trajectory.txt").to_str().unwrap(),
        gt.to_str().unwrap(),
        "--dump",
        out.join("correspondences.json").to_str().unwrap(),
        "--clip",
        &clip,
    ]));
    let row = csv_row(&stdout);
    assert!(field(&row, "in3d_10") > 50.0);
    assert!(field(&row, "rot_mean") < 0.5);
}

#[test]
fn eval_of_identical_trajectories_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), 3);
    let gt = Path::new(&clip).join("groundtruth.txt");
    let metrics = dir.path().join("metrics");
    let stdout = ok(&anchorreg(&[
        "eval",
        gt.to_str().unwrap(),
        gt.to_str().unwrap(),
        "--out",
        metrics.to_str().unwrap(),
    ]));
    let row = csv_row(&stdout);
    for name in ["rot_acc5", "rot_acc10", "tr_acc5", "tr_acc10"] {
        assert_eq!(field(&row, name), 100.0, "{name}");
    }
    for name in ["rot_mean", "rot_med", "tr_mean", "tr_med"] {
        assert_eq!(field(&row, name), 0.0, "{name}");
    }
    assert!(row
        .iter()
        .filter(|(k, _)| k.starts_with("in"))
        .all(|(_, v)| v.is_empty()));
    assert_eq!(std::fs::read_to_string(metrics.join("metrics.csv")).unwrap(), stdout);
}

#[test]
fn bench_stages_account_for_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synth(dir.path(), 2);
    let config = dir.path().join("fast.toml");
    let out = dir.path().join("out");
    let stdout = ok(&anchorreg(&[
        "bench",
        &clip,
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--descriptor",
        "patch",
        "--frames",
        "2",
    ]));
    let rows: Vec<(String, f64)> = stdout
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split_whitespace();
            (it.next().unwrap().to_string(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    let get = |name: &str| rows.iter().find(|(n, _)| n == name).unwrap().1;
    let stages: f64 = rows
        .iter()
        .filter(|(n, _)| n != "sum" && n != "wall")
        .map(|(_, s)| s)
        .sum();
    assert!((stages - get("sum")).abs() < 1e-5);
    assert!(get("sum") <= get("wall"));
    assert!(get("sum") >= 0.8 * get("wall"), "{stdout}");
    for stage in ["load", "descriptors", "correspondences"] {
        assert!(rows.iter().any(|(n, _)| n == stage), "missing {stage}");
    }
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = anchorreg(&["register", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let clip = synth(dir.path(), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "inner_iterations = 3\n").unwrap();
    let out = anchorreg(&["register", &clip, "--frames", "2", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
}
