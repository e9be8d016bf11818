use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
# coarse but resolved enough to see the shock
params.delta = 0.1
params.p = 1
grid.points_per_pulse = 40
fan.count = 32
";

fn shockpulse(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("run.cfg");
    if !config.exists() {
        fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_shockpulse"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = shockpulse(dir.path(), &["run", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("trigger = mu_floor"));
    for f in ["config.txt", "fan.csv", "muhist.csv", "mu_min.svg", "fan.svg", "report.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let echoed = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echoed.contains("grid.points_per_pulse = 40"));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = shockpulse(dir.path(), &["run", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["fan.csv", "muhist.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn check_data_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let o = shockpulse(dir.path(), &["check-data"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("shock assumption holds"));
    let o = shockpulse(dir.path(), &["predict"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("t_blow_pred = 1.17"));
}

#[test]
fn sweep_prints_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = shockpulse(
        dir.path(),
        &["sweep", "--out", out.to_str().unwrap(), "--set", "sweep.delta=0.2,0.15,0.1,0.07"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p = 1: slope"));
    assert!(out.join("sweep.csv").is_file());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = shockpulse(dir.path(), &["run", "--set", "bogus.key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = shockpulse(dir.path(), &["run", "--set", "time.cfl=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time.cfl"));
    let o = Command::new(env!("CARGO_BIN_EXE_shockpulse")).arg("run").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn supercritical_predict_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = shockpulse(dir.path(), &["predict", "--set", "params.p=5", "--set", "profile.amplitude=0.1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn convergence_needs_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = shockpulse(dir.path(), &["convergence", "--levels", "2"]);
    assert_eq!(o.status.code(), Some(4));
}
