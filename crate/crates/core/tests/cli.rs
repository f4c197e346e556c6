use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgd")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exp2_writes_the_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp2.csv");
    let o = bgd(&["exp2", "--grid", "0.1:0.3:0.1", "--runs", "2", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "grid_value,mean_dist,log_mean_dist,diverged,run_seeds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(4).unwrap().split(';').count() == 2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spearman"));
}

#[test]
fn exp1_single_cell_goes_to_stdout() {
    let o = bgd(&["exp1", "--grid", "1:1:0.1", "--runs", "1", "--iters", "50", "--dim", "3"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "grid=0.5:0.5:0.1\nruns_per_cell=3\nmaster_seed=4\n").unwrap();
    let a = bgd(&["exp2", "--config", path(&cfg)]);
    let b = bgd(&["exp2", "--config", path(&cfg), "--runs", "1"]);
    let seeds = |o: &Output| {
        let text = String::from_utf8(o.stdout.clone()).unwrap();
        text.lines().nth(1).unwrap().split(',').nth(4).unwrap().split(';').count()
    };
    assert_eq!(seeds(&a), 3);
    assert_eq!(seeds(&b), 1);
}

#[test]
fn single_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("run.csv");
    let fin = dir.path().join("final.txt");
    let q = dir.path().join("q.txt");
    let report = dir.path().join("report.csv");
    let o = bgd(&[
        "single", "--oracle", "constant:0.2", "--schedule", "harmonic:1", "--iters", "300", "--dim", "4",
        "--out", path(&rec), "--final-out", path(&fin), "--save-q", path(&q),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&rec).unwrap().lines().count(), 302);
    assert_eq!(fs::read_to_string(&fin).unwrap().lines().count(), 4);
    assert_eq!(fs::read_to_string(&q).unwrap().lines().count(), 5);

    let o = bgd(&["diagnose", "--record", path(&rec), "--out", path(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verdict=bounded-consistent"));
    assert!(fs::read_to_string(&report).unwrap().starts_with("window,Tn,r,ratio,flag\n"));
}

#[test]
fn check_schedule_reports_violations() {
    let o = bgd(&["check-schedule", "--schedule", "cyclic:800:100", "--horizon", "1600"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sum_squares_finite=no"));
    assert!(text.contains("satisfied=false"));
    let o = bgd(&["check-schedule", "--schedule", "harmonic:1"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("satisfied=true"));
}

#[test]
fn invalid_input_exits_with_2() {
    assert_eq!(bgd(&["exp1", "--grid", "2:1:0.1"]).status.code(), Some(2));
    assert_eq!(bgd(&["check-schedule", "--schedule", "harmonic:0.5"]).status.code(), Some(2));
    assert_eq!(bgd(&["single", "--oracle", "spsa:-1"]).status.code(), Some(2));
    assert_eq!(bgd(&["exp2", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "no_such_key=1\n").unwrap();
    assert_eq!(bgd(&["exp2", "--config", path(&cfg)]).status.code(), Some(2));
}

#[test]
fn ill_conditioned_newton_exits_with_3() {
    // Eigenvalues spread over 15 decades put the condition number past 1e12.
    let o = bgd(&["single", "--oracle", "newton:0", "--spectrum", "1e-15:1", "--iters", "5"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn diverged_runs_are_reported() {
    let o = bgd(&["single", "--schedule", "constant:1", "--spectrum", "4:6", "--iters", "200"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Diverged"));
}
