use std::path::{Path, PathBuf};
use std::process::Command;

use cnre_bench::cli;
use cnre_bench::run::RunRecord;
use cnre_core::diagnostics::DiagnosticsReport;
use cnre_core::tasks::{read_joint_csv, read_matrix_csv};
use cnre_core::train::{Checkpoint, TrainConfig, TrainReport};

fn cnre(args: &[&str]) -> i32 {
    cli::run(std::iter::once("cnre").chain(args.iter().copied()))
}

fn only_run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn train_writes_checkpoint_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let code = cnre(&[
        "train", "--task", "conjugate_gaussian", "--gamma", "1", "--k", "1", "--epochs", "5", "--seed", "7", "--out", out,
    ]);
    assert_eq!(code, 0);
    let dir = only_run_dir(tmp.path());
    let ck = Checkpoint::load(&dir.join("checkpoint.json")).unwrap();
    assert_eq!(ck.config.seed, 7);
    assert_eq!(ck.config.max_epochs, 5);
    let log = TrainReport::read_csv(&dir.join("log.csv")).unwrap();
    assert_eq!(log.len(), 5);
    let cfg = TrainConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(cfg, ck.config);
    let rec = RunRecord::load(&dir.join("record.json")).unwrap();
    assert_eq!(rec.config, cfg);
    assert_eq!(rec.metrics.unwrap().best_epoch, Some(ck.epoch));

    // diagnose the checkpoint: every diagnostic field is present
    let report_path = tmp.path().join("diag.json");
    let code = cnre(&[
        "diagnose",
        "--checkpoint",
        dir.join("checkpoint.json").to_str().unwrap(),
        "--task",
        "conjugate_gaussian",
        "--n-per-class",
        "300",
        "--z-samples",
        "2000",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let rep: DiagnosticsReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(rep.auc.is_some_and(|a| (0.0..=1.0).contains(&a)));
    assert!(!rep.roc_points.is_empty());
    assert!(rep.i0_hat.unwrap() >= rep.i1_hat.unwrap());
    assert_eq!(rep.z_hat_stats.unwrap().count, 10);

    // the report is a pure function of the checkpoint and settings
    let again = tmp.path().join("diag2.json");
    assert_eq!(
        cnre(&[
            "diagnose",
            "--checkpoint",
            dir.join("checkpoint.json").to_str().unwrap(),
            "--n-per-class",
            "300",
            "--z-samples",
            "2000",
            "--out",
            again.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(std::fs::read(&report_path).unwrap(), std::fs::read(&again).unwrap());

    // wrong task is rejected
    assert_eq!(
        cnre(&["diagnose", "--checkpoint", dir.join("checkpoint.json").to_str().unwrap(), "--task", "two_moons"]),
        1
    );

    // sampling from the surrogate
    let samples = tmp.path().join("samples.csv");
    let code = cnre(&[
        "sample",
        "--checkpoint",
        dir.join("checkpoint.json").to_str().unwrap(),
        "--x",
        "-0.4",
        "--n",
        "250",
        "--sampler",
        "slice",
        "--out",
        samples.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(read_matrix_csv(&samples).unwrap().shape(), (250, 1));
}

#[test]
fn train_reads_a_config_file_and_applies_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.toml");
    std::fs::write(
        &cfg_path,
        r#"
task = "two_moons"
regime = "fresh_prior"
arch = "small"
batch_size = 32
batches_per_epoch = 3
val_batches = 1
max_epochs = 2
mi_samples = 4

[loss]
variant = "C"
gamma = 2.0
k = 4
"#,
    )
    .unwrap();
    let runs = tmp.path().join("runs");
    let code = cnre(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--gamma",
        "inf",
        "--seed",
        "3",
        "--out",
        runs.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let ck = Checkpoint::load(&only_run_dir(&runs).join("checkpoint.json")).unwrap();
    assert_eq!(ck.config.loss.variant, cnre_core::loss::Variant::B);
    assert_eq!(ck.config.loss.k, 4);
    assert_eq!(ck.config.seed, 3);
    assert_eq!(ck.config.batch_size, 32);
}

#[test]
fn simulate_writes_joint_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sims.csv");
    assert_eq!(cnre(&["simulate", "--task", "slcp", "--n", "20", "--seed", "1", "--out", out.to_str().unwrap()]), 0);
    let joint = read_joint_csv(&out).unwrap();
    assert_eq!(joint.theta.shape(), (20, 5));
    assert_eq!(joint.x.shape(), (20, 8));
}

#[test]
fn usage_errors_exit_with_two_and_other_errors_with_one() {
    let bin = env!("CARGO_BIN_EXE_cnre");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = status(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(status(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(status(&["--help"]).status.code(), Some(0));
    let o = status(&["train", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(status(&["train", "--task", "no_such_task"]).status.code(), Some(1));
    assert_eq!(status(&["train", "--task", "two_moons", "--k", "600"]).status.code(), Some(1));
}

#[test]
fn grid_then_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    std::fs::write(
        &spec,
        r#"
tasks = ["conjugate_gaussian"]
gammas = [1.0, inf]
ks = [1, 3]
seeds = [2]
budgets = [352]

[base]
batch_size = 16
max_epochs = 2
mi_samples = 8

[eval]
c2st_observations = 0
z_observations = 2
z_samples = 200
importance_n_per_class = 0
mi_n = 0
"#,
    )
    .unwrap();
    let grid_dir = tmp.path().join("g");
    let g = grid_dir.to_str().unwrap();
    assert_eq!(cnre(&["grid", "--config", spec.to_str().unwrap(), "--out", g]), 0);
    let summary = std::fs::read_to_string(grid_dir.join("grid_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(summary.contains(",nre-b,inf,"));

    let rep = tmp.path().join("r");
    let runs = grid_dir.join("runs");
    assert_eq!(cnre(&["report", "--runs", runs.to_str().unwrap(), "--out", rep.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(rep.join("grid_summary.csv")).unwrap(), summary);
    assert!(rep.join("figure_table.csv").is_file());

    let rep2 = tmp.path().join("r2");
    let s = grid_dir.join("grid_summary.csv");
    assert_eq!(cnre(&["report", "--summary", s.to_str().unwrap(), "--out", rep2.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(rep2.join("grid_summary.csv")).unwrap(), summary);
}
