use std::process::Command;

fn sania() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sania"));
    c.env_remove("SANIA_DATA_DIR");
    c
}

fn error_code(stderr: &[u8]) -> String {
    let line = String::from_utf8_lossy(stderr).lines().last().unwrap_or_default().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap_or_else(|_| panic!("not JSON: {line}"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn run_writes_csv_with_header() {
    let out = sania()
        .args(["run", "--dataset", "synthetic:60:8", "--batch-size", "20", "--epochs", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,step,loss,full_train_loss,train_accuracy,grad_norm,lambda,kappa,method,dataset,scale_k,seed"
    );
    // initial row, then 3 steps and a summary per epoch
    assert_eq!(lines.count(), 1 + 2 * 4);
}

#[test]
fn output_file_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = sania()
        .args(["run", "--dataset", "synthetic:40:5", "--epochs", "1", "--method", "sps"])
        .arg("--output")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "completed");
    assert_eq!(meta["dataset_rows"], 40);
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("epoch,step,"));
}

#[test]
fn missing_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = sania().env("SANIA_DATA_DIR", dir.path()).args(["run", "--dataset", "mushrooms"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out.stderr), "dataset-missing");
}

#[test]
fn data_dir_env_resolves_names() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny"), "1 1:0.5 2:1\n-1 1:-1 3:0.25\n1 2:2\n").unwrap();
    let out = sania()
        .env("SANIA_DATA_DIR", dir.path())
        .args(["run", "--dataset", "tiny", "--epochs", "1", "--method", "sania-adagrad-sqr"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn incompatible_method_is_reported() {
    let out = sania()
        .args(["run", "--dataset", "synthetic:30:4", "--objective", "nllsq", "--method", "sania-newton"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out.stderr), "incompatible-method");
}

#[test]
fn learning_rate_rules() {
    let out = sania().args(["run", "--dataset", "synthetic:30:4", "--method", "adam"]).output().unwrap();
    assert_eq!(error_code(&out.stderr), "invalid-config");
    let out = sania()
        .args(["run", "--dataset", "synthetic:30:4", "--method", "sania-adam-sqr", "--step-size", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out.stderr), "invalid-config");
}

#[test]
fn usage_errors_exit_two() {
    let out = sania().args(["run", "--method", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out.stderr), "usage");
    let out = sania().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_succeeds() {
    let out = sania().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["run", "invariance", "lr-sweep", "cubic-robustness"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn invariance_subcommand_reports_verdict() {
    let out = sania()
        .args([
            "invariance", "--dataset", "synthetic:80:6", "--batch-size", "20", "--epochs", "3", "--method",
            "sania-adagrad-sqr",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(verdict["verdict"], "pass");
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("epoch,loss_original,loss_scaled,relative_gap\n"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn lr_sweep_subcommand() {
    let out = sania()
        .args(["lr-sweep", "--dataset", "synthetic:40:5", "--method", "sgd", "--epochs", "1", "--grid=-3,-1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    let out = sania().args(["lr-sweep", "--dataset", "synthetic:40:5", "--method", "sania-adam-sqr"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cubic_robustness_subcommand() {
    let out = sania()
        .args(["cubic-robustness", "--dataset", "synthetic:100:10", "--l2-grid", "0.1", "--grad-reg-l2", "0.01"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 + 1 + 1);
    assert!(text.lines().filter(|l| l.starts_with("cubic-polyak")).all(|l| l.ends_with("true")));
}
