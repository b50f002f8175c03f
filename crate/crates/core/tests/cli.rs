use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_billiard-bvp");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_cfg(cfg: &str, args: &[&str]) -> (i32, String) {
    let path = config(cfg);
    let mut all = vec!["--config", path.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = run(&all);
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_finds_three_and_seven_impact_solutions() {
    let (code, csv) = run_cfg("example21.cfg", &["solve"]);
    assert_eq!(code, 0);
    assert_eq!(
        csv.lines().next(),
        Some("v,residual,impact_count,impact_times")
    );
    let vs = column(&csv, 0);
    for target in [-0.8568, -1.76579] {
        assert!(
            vs.iter().any(|v| (v - target).abs() < 1e-3),
            "{target} missing: {vs:?}"
        );
    }
    assert!(column(&csv, 1).iter().all(|r| *r <= 1e-8));
}

#[test]
fn simulate_example22_ends_at_quarter() {
    let (code, csv) = run_cfg("example22.cfg", &["simulate", "--v", "-1"]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().next(), Some("t,x1,v1,segment"));
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - 0.25).abs() <= 1e-8);
}

#[test]
fn simulate_writes_impacts() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let impacts = dir.path().join("impacts.csv");
    let (code, stdout) = run_cfg(
        "ball-free.cfg",
        &[
            "simulate",
            "--v",
            "2,0",
            "--impacts",
            impacts.to_str().unwrap(),
            "--output",
            traj.to_str().unwrap(),
        ],
    );
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let traj = std::fs::read_to_string(traj).unwrap();
    assert_eq!(traj.lines().next(), Some("t,x1,x2,v1,v2,segment"));
    let impacts = std::fs::read_to_string(impacts).unwrap();
    let lines: Vec<&str> = impacts.lines().collect();
    assert_eq!(lines[0], "t,point1,point2,vin1,vin2,vout1,vout2,side");
    assert_eq!(lines.len(), 2);
    let t: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert!((t - 0.5).abs() <= 1e-12);
}

#[test]
fn winding_on_free_disc() {
    let (code, csv) = run_cfg("ball-free.cfg", &["winding", "--d", "1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "d,winding,min_dist,samples_used");
    assert_eq!(lines[1].split(',').nth(1), Some("1"));
}

#[test]
fn headers_of_remaining_commands() {
    let cases: [(&str, &[&str], &str); 5] = [
        (
            "example21.cfg",
            &["shoot", "--v-min", "-2", "--v-max", "2", "--grid", "8"],
            "v,endpoint,impact_count,status",
        ),
        (
            "ball-free.cfg",
            &["attainable", "--d", "3", "--samples", "16"],
            "theta,d,y1,y2,status",
        ),
        ("ball-free.cfg", &["sweep"], "d,winding,min_dist,flag"),
        (
            "ball-free.cfg",
            &["normal-rays"],
            "v1,v2,residual,impact_count,impact_times",
        ),
        (
            "ball-free.cfg",
            &["deviation", "--d", "5", "--dirs", "8"],
            "theta,first_impact,until_first_impact,full_horizon,status",
        ),
    ];
    for (cfg, args, header) in cases {
        let (code, csv) = run_cfg(cfg, args);
        assert_eq!(code, 0, "{args:?}");
        assert_eq!(csv.lines().next(), Some(header), "{args:?}");
    }
    let (_, csv) = run_cfg(
        "example21.cfg",
        &["shoot", "--v-min", "-2", "--v-max", "2", "--grid", "8"],
    );
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn sweep_flags_even_speeds() {
    let (_, csv) = run_cfg("ball-free.cfg", &["sweep"]);
    let flags: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(
        flags,
        [
            "none",
            "origin_too_close",
            "none",
            "origin_too_close",
            "none"
        ]
    );
}

#[test]
fn output_is_deterministic() {
    let args = ["solve", "--v-min", "0.5", "--v-max", "2.5"];
    let (_, first) = run_cfg("example21.cfg", &args);
    let (_, second) = run_cfg("example21.cfg", &args);
    assert_eq!(first, second);
    let path = config("example21.cfg");
    let single = Command::new(BIN)
        .env("BILLIARD_BVP_THREADS", "1")
        .args(["--config", path.to_str().unwrap()])
        .args(args)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(single.stdout).unwrap(), first);
}

#[test]
fn schema_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = std::fs::read_to_string(config("example21.cfg")).unwrap();
    std::fs::write(
        &bad,
        text.replace("T = 1.0", "T = -1.0")
            .replace("a = 0.125", "a = \"wide\""),
    )
    .unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "solve"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("T: must be positive"), "{stderr}");
    assert!(stderr.contains("table.a"), "{stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let (code, _) = run_cfg("example22.cfg", &["simulate", "--v", "1,2"]);
    assert_eq!(code, 1);
    let (code, _) = run_cfg("example21.cfg", &["winding", "--d", "1"]);
    assert_eq!(code, 1);
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_two() {
    let (code, _) = run_cfg("ball-free.cfg", &["winding", "--d", "2"]);
    assert_eq!(code, 2);
}
