//! Integration tests of the CLI surface: config execution, the
//! case-study round trip, sweeps, exit codes and the seed override.

use std::collections::BTreeMap;
use std::process::Command;

use fixpoint_cli::casestudy::run_case_study;
use fixpoint_cli::config::ExperimentConfig;
use fixpoint_cli::experiment::{execute, run_config, sweep};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fixpoint"))
}

#[test]
fn minimal_config_converges_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "problem": {
                "algorithm": {
                    "kind": "Projector",
                    "set": {"kind": "Hyperplane", "normal": [0.0, 1.0], "offset": 0.0}
                }
            },
            "run": {"x0": [0.37, -2.11], "seed": 5},
            "output": {"directory": "."}
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let (execution, _) = run_config(&config_path, Some(&out)).unwrap();
    assert_eq!(execution.trace.steps(), 1);
    assert!(out.join("trace.csv").exists());
    assert!(out.join("summary.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "converged");
    assert_eq!(summary["iterations"], 1);
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn malformed_config_is_rejected_with_field_name() {
    let err = ExperimentConfig::from_json(
        &serde_json::json!({
            "problem": {
                "algorithm": {
                    "kind": "Average",
                    "operators": [
                        {"kind": "Projector", "set": {"kind": "Ball", "center": [0.0, 0.0], "radius": 1.0}},
                        {"kind": "Projector", "set": {"kind": "Ball", "center": [0.0, 0.0], "radius": 2.0}}
                    ],
                    "weights": [0.7, 0.6]
                }
            },
            "run": {"x0": [0.0, 0.0], "seed": 1},
            "output": {"directory": "."}
        })
        .to_string(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("weights"), "{err}");
}

#[test]
fn case_study_config_replays_byte_identically() {
    let study_dir = tempfile::tempdir().unwrap();
    run_case_study("triangle", BTreeMap::new(), study_dir.path()).unwrap();
    let replay_dir = tempfile::tempdir().unwrap();
    run_config(
        &study_dir.path().join("config.json"),
        Some(replay_dir.path()),
    )
    .unwrap();
    for file in [
        "trace.csv",
        "summary.json",
        "estimates.json",
        "profile_epsilon_profile.csv",
    ] {
        let a = std::fs::read(study_dir.path().join(file)).unwrap();
        let b = std::fs::read(replay_dir.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between study and replay");
    }
}

#[test]
fn sweep_rows_are_sorted_and_deterministic() {
    let study_dir = tempfile::tempdir().unwrap();
    run_case_study("circles", BTreeMap::new(), study_dir.path()).unwrap();
    let config = ExperimentConfig::from_path(&study_dir.path().join("config.json")).unwrap();
    let out = tempfile::tempdir().unwrap();
    // Unsorted input values come out sorted.
    let rows = sweep(&config, "problem.params.r", &[2.0, 0.5, 1.0], out.path()).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values, vec![0.5, 1.0, 2.0]);
    // The certified column matches the closed-form rate bound per row.
    use fixpoint_core::regularity::{closed_form_constants, ClosedFormCase};
    for row in &rows {
        let expected =
            closed_form_constants(&ClosedFormCase::Circles { r: row.value }).unwrap()["c_bound"];
        assert_eq!(row.certified_c, Some(expected));
    }
    let text = std::fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("# fixpoint"));

    let out2 = tempfile::tempdir().unwrap();
    sweep(&config, "problem.params.r", &[2.0, 0.5, 1.0], out2.path()).unwrap();
    assert_eq!(
        std::fs::read(out.path().join("sweep.csv")).unwrap(),
        std::fs::read(out2.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn raar_relaxation_sweep_stays_bounded_on_inconsistent_phase_toy() {
    let study_dir = tempfile::tempdir().unwrap();
    let mut params = BTreeMap::new();
    params.insert("consistent".to_string(), serde_json::json!(false));
    run_case_study("phase_retrieval_toy", params, study_dir.path()).unwrap();
    let config = ExperimentConfig::from_path(&study_dir.path().join("config.json")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let rows = sweep(&config, "problem.params.beta", &values, out.path()).unwrap();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert_eq!(
            serde_json::to_value(row.outcome).unwrap(),
            serde_json::json!("converged"),
            "relaxation {} did not stay bounded/converge",
            row.value
        );
    }
}

#[test]
fn sweep_rejects_bad_paths() {
    let study_dir = tempfile::tempdir().unwrap();
    run_case_study("circles", BTreeMap::new(), study_dir.path()).unwrap();
    let config = ExperimentConfig::from_path(&study_dir.path().join("config.json")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let err = sweep(&config, "problem.params.radius", &[1.0], out.path()).unwrap_err();
    assert!(err.to_string().contains("radius"), "{err}");
}

#[test]
fn exit_codes_follow_contract() {
    // 0: all checks pass.
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["case", "triangle", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // 2: configuration error (unknown case).
    let status = bin()
        .args(["case", "heptagon", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // 2: unknown parameter.
    let status = bin()
        .args(["case", "circles", "--param", "radius=2", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn seed_env_var_overrides_config_seed() {
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path, seed: &str| {
        let status = bin()
            .args(["case", "triangle", "--out"])
            .arg(dir)
            .env("FIXPOINT_SEED", seed)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    run(out_a.path(), "7");
    run(out_b.path(), "7");
    let a = std::fs::read(out_a.path().join("trace.csv")).unwrap();
    let b = std::fs::read(out_b.path().join("trace.csv")).unwrap();
    assert_eq!(a, b);
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.path().join("config.json")).unwrap())
            .unwrap();
    assert_eq!(config["run"]["seed"], 7);
}

#[test]
fn execute_without_outdir_writes_nothing() {
    let study_dir = tempfile::tempdir().unwrap();
    run_case_study("triangle", BTreeMap::new(), study_dir.path()).unwrap();
    let config = ExperimentConfig::from_path(&study_dir.path().join("config.json")).unwrap();
    let execution = execute(&config, None).unwrap();
    assert!(execution.trace.steps() > 0);
}
