use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use eedqn_cli::{execute, FileConfig, Plan};

fn small(out: &Path) -> FileConfig {
    FileConfig {
        out: Some(out.to_path_buf()),
        hidden: Some(vec![16]),
        prefill_steps: Some(200),
        replay_capacity: Some(2_000),
        diff_capacity: Some(200),
        ..FileConfig::default()
    }
}

fn strings(xs: &[&str]) -> Option<Vec<String>> {
    Some(xs.iter().map(|s| s.to_string()).collect())
}

#[test]
fn empty_plan_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.envs = Some(vec![]);
    let plan = Plan::from_config(cfg).unwrap();
    assert!(plan.cells.is_empty());
    let report = execute(&plan).unwrap();
    assert!(report.all_ok());
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.trim_end(), "env,algo,seed,final_score,peak_q_ratio");
}

#[test]
fn chain_grid_with_default_networks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = FileConfig {
        envs: strings(&["chain:5"]),
        algos: strings(&["dqn", "eedqn"]),
        seeds: Some(2),
        steps: Some(10_000),
        out: Some(dir.path().to_path_buf()),
        ..FileConfig::default()
    };
    let plan = Plan::from_config(cfg).unwrap();
    assert_eq!(plan.cells.len(), 4);
    let start = Instant::now();
    let report = execute(&plan).unwrap();
    eprintln!("chain 2x2 grid at 10^4 steps took {:?}", start.elapsed());
    assert!(report.all_ok(), "{:?}", report.outcomes);
    for (cell, _) in &report.outcomes {
        let d = cell.dir(dir.path());
        for f in ["epochs.csv", "episodes.csv", "checkpoint.json", "config.json"] {
            assert!(d.join(f).is_file(), "{}", d.join(f).display());
        }
        let epochs = fs::read_to_string(d.join("epochs.csv")).unwrap();
        assert_eq!(epochs.lines().count(), 101);
    }
    let results = eedqn_core::metrics::read_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(results.len(), 4);
    let summary = eedqn_core::metrics::read_summary_json(&dir.path().join("summary.json")).unwrap();
    assert_eq!(summary.groups.len(), 2);
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let mut cfg = small(out);
        cfg.envs = strings(&["breakout"]);
        cfg.algos = strings(&["eedqn", "nstep"]);
        cfg.seeds = Some(1);
        cfg.steps = Some(1_500);
        let plan = Plan::from_config(cfg).unwrap();
        assert!(execute(&plan).unwrap().all_ok());
    };
    run(a.path());
    run(b.path());
    for rel in ["results.csv", "summary.json", "breakout/eedqn/0/epochs.csv", "breakout/nstep/0/epochs.csv"] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn unknown_names_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut cfg = small(&out);
    cfg.algos = strings(&["dqn", "rainbow"]);
    assert!(Plan::from_config(cfg).unwrap_err().contains("rainbow"));
    let mut cfg = small(&out);
    cfg.envs = strings(&["breakout", "pong"]);
    assert!(Plan::from_config(cfg).unwrap_err().contains("pong"));
    assert!(!out.exists());
}

#[test]
fn ablation_preset() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.envs = strings(&["breakout"]);
    cfg.seeds = Some(1);
    cfg.steps = Some(1_000);
    let plan = Plan::ablation(cfg).unwrap();
    assert_eq!(plan.cells.len(), 8);
    assert!(plan.cells.iter().all(|c| c.env == "breakout"));
    let report = execute(&plan).unwrap();
    assert!(report.all_ok(), "{:?}", report.outcomes);
    let results = eedqn_core::metrics::read_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(results.len(), 8);
}

#[test]
fn failing_cell_leaves_others_intact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    // freeway episodes last 2500 steps, so this cell never completes one
    cfg.envs = strings(&["chain:3", "freeway"]);
    cfg.algos = strings(&["dqn"]);
    cfg.seeds = Some(1);
    cfg.steps = Some(500);
    let plan = Plan::from_config(cfg).unwrap();
    let report = execute(&plan).unwrap();
    assert!(!report.all_ok());
    let ok: Vec<_> = report.outcomes.iter().filter(|(_, r)| r.is_ok()).collect();
    assert_eq!(ok.len(), 1);
    assert_eq!(ok[0].0.env, "chain:3");
    let results = eedqn_core::metrics::read_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(results.len(), 1);
    assert!(dir.path().join("chain:3/dqn/0/epochs.csv").is_file());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = FileConfig {
        seeds: Some(5),
        steps: Some(7),
        ..FileConfig::default()
    };
    let flags = FileConfig {
        seeds: Some(2),
        ..FileConfig::default()
    };
    let merged = flags.or(file);
    assert_eq!((merged.seeds, merged.steps), (Some(2), Some(7)));

    let paper = Plan::from_config(FileConfig {
        paper_scale: Some(true),
        out: Some(dir.path().to_path_buf()),
        ..FileConfig::default()
    })
    .unwrap();
    assert_eq!(paper.steps, 1_000_000);
    assert_eq!(paper.cells.len(), 2 * 2 * 10);
    let default = Plan::from_config(FileConfig::default()).unwrap();
    assert_eq!(default.steps, 200_000);
    assert_eq!(default.cells.len(), 2 * 2 * 3);
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"hidden": [16], "prefill_steps": 100, "steps": 99, "seeds": 4}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_eedqn"))
        .args(["run", "--env", "chain:3", "--algo", "dqn,esdqn", "--seeds", "1", "--steps", "600"])
        .arg("--out")
        .arg(&out)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let results = eedqn_core::metrics::read_results_csv(&out.join("results.csv")).unwrap();
    assert_eq!(results.len(), 2);
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("chain:3/esdqn/0/config.json")).unwrap()).unwrap();
    assert_eq!(echo["total_steps"], 600);
    assert_eq!(echo["run"]["hidden"], serde_json::json!([16]));

    let bad = Command::new(env!("CARGO_BIN_EXE_eedqn"))
        .args(["run", "--algo", "rainbow", "--steps", "10"])
        .arg("--out")
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("rainbow"));
}
