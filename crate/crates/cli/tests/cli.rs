use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[grid]
dim = 1
n = 128
length = 30.0
[coupling]
sigma = 1.0
lambda = [[1.0, 0.2], [0.2, 1.0]]
[initial.u]
family = "sech"
amplitude = 1.2
width = 1.0
[initial.v]
family = "gaussian"
amplitude = 0.8
width = 1.5
[noise]
K = 4
a0 = 0.3
[time]
t_final = 0.2
dt = 1e-3
record_every = 20
[run]
seed = 17
output_dir = "out"
"#;

fn scnls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scnls"))
        .args(args)
        .env("SCNLS_OUTPUT_DIR", out)
        .env_remove("SCNLS_WORKERS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(scnls(&["simulate", &cfg], &a).status.code(), Some(0));
    assert_eq!(scnls(&["simulate", &cfg], &b).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn invalid_sigma_exits_one_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("sigma = 1.0", "sigma = 0.0"));
    let out = dir.path().join("out");
    let res = scnls(&["simulate", &cfg], &out);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
    let res = scnls(
        &[
            "simulate",
            &dir.path().join("missing.toml").to_string_lossy(),
        ],
        &out,
    );
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("a0 = 0.3", "a0 = 0.3\nampl = 1.0"),
    );
    assert_eq!(
        scnls(&["simulate", &cfg], &dir.path().join("o"))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn ensemble_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("w1");
    let b = dir.path().join("w3");
    assert!(
        scnls(&["ensemble", &cfg, "--paths", "5", "--workers", "1"], &a)
            .status
            .success()
    );
    let res = Command::new(env!("CARGO_BIN_EXE_scnls"))
        .args(["ensemble", &cfg, "--paths", "5"])
        .env("SCNLS_OUTPUT_DIR", &b)
        .env("SCNLS_WORKERS", "3")
        .output()
        .unwrap();
    assert!(res.status.success());
    for f in ["ensemble.json", "paths.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let json: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(json["n_paths"], 5);
}

#[test]
fn criterion_and_groundstate_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o");
    let res = scnls(&["criterion", &cfg, "--tbar", "0.5"], &out);
    assert!(res.status.success());
    let json: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(json["lhs"].is_number());
    assert!(out.join("criterion.json").exists());

    let res = scnls(&["criterion", &cfg, "--tbar", "-1"], &out);
    assert_eq!(res.status.code(), Some(1));

    let res = scnls(&["groundstate", &cfg], &out);
    assert!(res.status.success());
    let json: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    for key in [
        "sigma",
        "beta",
        "N",
        "l2_P",
        "l2_Q",
        "k_opt",
        "residual_inf",
        "grid",
    ] {
        assert!(!json[key].is_null(), "{key}");
    }
    assert!(out.join("groundstate_profile.csv").exists());
}

#[test]
fn blowup_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[grid]
dim = 2
n = 64
length = 20.0
[coupling]
sigma = 1.0
lambda = [[1.0, 0.0], [0.0, 1.0]]
[initial.u]
family = "gaussian"
amplitude = 4.0
width = 1.0
[time]
t_final = 1.0
dt = 1e-3
"#;
    let cfg = write_config(dir.path(), text);
    let res = scnls(&["simulate", &cfg], &dir.path().join("o"));
    assert_eq!(res.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(json["outcome"]["kind"], "blow_up");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scnls(&["simulate"], dir.path()).status.code(), Some(1));
    assert_eq!(scnls(&["nonsense"], dir.path()).status.code(), Some(1));
    assert_eq!(scnls(&["--help"], dir.path()).status.code(), Some(0));
}
