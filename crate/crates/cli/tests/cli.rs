use std::path::Path;
use std::process::{Command, Output};

fn resflow(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_resflow"));
    cmd.args(args).env_remove("RESFLOW_SEED");
    if let Some(s) = env_seed {
        cmd.env("RESFLOW_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn small_target_study(dir: &Path, seed_flag: Option<&str>, env_seed: Option<&str>) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "run", "--experiment", "target_study", "--system", "saddle", "--pairs", "30", "--iterations", "4", "--out", out,
        "--jobs", "2",
    ];
    if let Some(s) = seed_flag {
        args.extend(["--seed", s]);
    }
    resflow(&args, env_seed)
}

#[test]
fn lists_systems() {
    let out = resflow(&["systems"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["saddle", "nodal_sink", "pendulum", "toggle_scaled", "electric_network", "nonautonomous_4d"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{id}\t"))), "{id} missing");
    }
}

#[test]
fn order_study_writes_csv_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = resflow(
        &["run", "--experiment", "order_study", "--system", "star_point", "--pairs", "20", "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["experiment"], "order_study");
    assert_eq!(summary["files"].as_array().unwrap().len(), 2);

    let csv = std::fs::read_to_string(dir.path().join("order_study.csv")).unwrap();
    assert!(csv.starts_with("scheme,dt,target_error\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("order_study.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["pairs"], 20);
    assert_eq!(meta["system"], "star_point");
    assert_eq!(meta["dt"], 0.1);
    assert!(meta["version"].is_string());
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "experiment = \"trajectory\"\nsystem = \"saddle\"\npairs = 30\niterations = 3\nschemes = [\"rk2\"]\noutput_dir = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = resflow(&["run", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory_reference.csv", "trajectory_resnet_rk2.csv", "params_rk2.json", "trajectory_summary.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_target_study(a.path(), Some("5"), None).status.success());
    assert!(small_target_study(b.path(), Some("5"), None).status.success());
    for f in ["target_study.csv", "target_study_summary.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn env_seed_applies_below_the_flag() {
    let base = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let both = tempfile::tempdir().unwrap();
    assert!(small_target_study(base.path(), Some("5"), None).status.success());
    assert!(small_target_study(env.path(), None, Some("6")).status.success());
    assert!(small_target_study(both.path(), Some("5"), Some("6")).status.success());
    let read = |d: &Path| std::fs::read(d.join("target_study.csv")).unwrap();
    assert_ne!(read(base.path()), read(env.path()));
    assert_eq!(read(base.path()), read(both.path()));
}

#[test]
fn unknown_system_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = resflow(&["run", "--experiment", "order_study", "--system", "nope", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "unknown_system");
    assert!(err["error"]["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn bad_config_file_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"experiment\": 3}").unwrap();
    let out = resflow(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "json");

    let missing = resflow(&["run", "--config", dir.path().join("absent.json").to_str().unwrap()], None);
    assert_eq!(error_json(&missing)["error"]["kind"], "io");
}

#[test]
fn usage_errors_are_json_too() {
    let out = resflow(&["run", "--pairs", "many"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    let out = resflow(&["run", "--experiment", "order_study"], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_argument");
}
