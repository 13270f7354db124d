use std::path::Path;
use std::process::{Command, Output};

fn fsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsl"))
        .args(args)
        .env_remove("FSL_THREADS")
        .output()
        .expect("failed to launch fsl")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.toml");
    let text = format!(
        "test_case = \"l_shape\"\nkappa_list = [1e-12]\ndelta_grid = [1.5, 2.0]\noutput_dir = \"{}\"\n{extra}",
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = fsl(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("kappa=1e-12"));
    for name in ["sweep.csv", "sweep.svg", "run.json"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
}

#[test]
fn output_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let other = dir.path().join("elsewhere");
    let out = fsl(&["run", "--config", &cfg, "--output", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(other.join("sweep.csv").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn strict_run_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "max_iter = 1\n");
    assert_eq!(fsl(&["run", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(fsl(&["run", "--config", &cfg, "--strict"]).status.code(), Some(2));
}

#[test]
fn invalid_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_realizations = 0\n");
    let out = fsl(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(fsl(&["run", "--config", "/nonexistent/exp.toml"]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_fsl"))
        .args(["infsup", "--h", "0.5"])
        .env("FSL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mandel_check_passes() {
    let out = fsl(&["mandel-check"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(!text.contains("FAIL"));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn infsup_reports_a_positive_constant_for_p2p1() {
    let out = fsl(&["infsup", "--disc", "p2p1", "--h", "0.25"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let gamma: f64 = text
        .split("gamma = ")
        .nth(1)
        .and_then(|s| s.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(gamma > 0.0);
    assert!(!fsl(&["infsup", "--h", "0.3"]).status.success());
}

#[test]
fn calibrate_prints_a_coefficient() {
    let args = ["calibrate", "--case", "unit_square_setup1", "--kappa", "1e-12", "--resolution", "4"];
    let out = fsl(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("unit_square_setup1: c = "));
    // a delta grid coarser than the c scan cannot resolve it
    let coarse = fsl(&[&args[..], &["--step", "0.25"]].concat());
    assert_eq!(coarse.status.code(), Some(1));
}
