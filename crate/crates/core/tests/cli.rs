use std::process::Command;

fn stabilize() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stabilize"));
    cmd.env_remove("STABILIZE_OUT_DIR");
    cmd
}

#[test]
fn care_check_prints_certificate() {
    let out = stabilize().args(["care-check", "--a", "1", "--b", "1"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = v["p"][0][0].as_f64().unwrap();
    assert!((p - (1.0 + 2f64.sqrt())).abs() < 1e-10);
    assert_eq!(v["hurwitz"], true);
}

#[test]
fn run_one_reports_outcome() {
    let out = stabilize().args(["--seed", "3", "run-one", "--tau", "2", "--posterior"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["success", "failure_reason", "estimation_error", "config", "posterior"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn sweep_writes_files_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "name = \"t\"\nswept = \"tau\"\nvalues = [1.0, 2.0]\nn = [1, 2]\nreplicates = 4\n").unwrap();
    let run = |threads: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let status = stabilize()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--parallelism", threads])
            .env("STABILIZE_OUT_DIR", &out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        assert!(out_dir.join("t_success_rate.svg").exists());
        std::fs::read(out_dir.join("t.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
}

#[test]
fn simulate_writes_trajectory() {
    let out = stabilize().args(["simulate", "--tau", "0.5", "--epsilon", "0.05", "--output", "-"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2,x3,u1,u2\n"));
    assert_eq!(text.lines().count(), 502);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    for args in [
        vec!["sweep", "--fig", "9"],
        vec!["run-one", "--tau", "-1"],
        vec!["care-check", "--a", "1,2"],
        vec!["bogus"],
    ] {
        let status = stabilize().args(&args).output().unwrap().status;
        assert_eq!(status.code(), Some(1), "{args:?}");
    }
}
