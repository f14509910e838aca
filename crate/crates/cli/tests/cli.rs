use std::path::Path;
use std::process::{Command, Output};

fn fbeta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbeta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fbeta(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 6] = [
    "--synth",
    "n=400,dim=2,pos=0.2,sep=4",
    "--epochs",
    "5",
    "--hidden",
    "8",
];

#[test]
fn train_writes_artifacts_and_repeats_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let mut args = vec!["train", "--seed", "7"];
        args.extend(SMALL);
        args.extend(["--out", path(dir)]);
        ok(&args);
    }
    for f in [
        "config.json",
        "records.csv",
        "scatter.csv",
        "summary.json",
        "checkpoint.json",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    for f in ["records.csv", "scatter.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let records = std::fs::read_to_string(a.join("records.csv")).unwrap();
    assert!(records.starts_with("epoch,loss,f0.5_train,f0.5_val,f1_train"));
    assert_eq!(records.lines().count(), 6);
}

#[test]
fn config_file_reproduces_inline_run() {
    let tmp = tempfile::tempdir().unwrap();
    let inline = tmp.path().join("inline");
    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--out", path(&inline)]);
    ok(&args);
    let from_cfg = tmp.path().join("cfg");
    let cfg = inline.join("config.json");
    ok(&["train", "--config", path(&cfg), "--out", path(&from_cfg)]);
    assert_eq!(
        std::fs::read(inline.join("records.csv")).unwrap(),
        std::fs::read(from_cfg.join("records.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let out = fbeta(&["train", "--epochs", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let out = fbeta(&["train", "--loss", "surrogate(beta=abc)", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("abc"));

    let out = fbeta(&["train", "--loss", "focal", "--out", "unused"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("focal"));

    let out = fbeta(&["train", "--batch-size", "0", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new("unused").exists());
}

#[test]
fn runtime_errors_exit_with_one_and_leave_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let missing = tmp.path().join("missing.csv");
    let out = fbeta(&["train", "--csv", path(&missing), "--out", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert!(!out_dir.exists());
}

#[test]
fn synth_csv_feeds_training_and_diagnosis() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("data.csv");
    ok(&[
        "synth",
        "--n",
        "300",
        "--dim",
        "3",
        "--pos",
        "0.3",
        "--seed",
        "4",
        "--out",
        path(&csv),
    ]);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("x0,x1,x2,label\n"));

    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--csv",
        path(&csv),
        "--epochs",
        "3",
        "--hidden",
        "4",
        "--out",
        path(&run),
    ]);
    let text = ok(&[
        "diagnose",
        "--checkpoint",
        path(&run.join("checkpoint.json")),
        "--csv",
        path(&csv),
    ]);
    assert!(text.contains("residual_norm") && text.contains("jensen_gap"));

    let json = ok(&[
        "diagnose",
        "--checkpoint",
        path(&run.join("checkpoint.json")),
        "--csv",
        path(&csv),
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["jensen_gap"]["gap"].as_f64().unwrap() >= 0.0);
}

#[test]
fn scatter_recomputes_the_saved_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let mut args = vec!["train", "--betas", "1,2"];
    args.extend(SMALL);
    args.extend(["--out", path(&run)]);
    ok(&args);
    let again = tmp.path().join("again.csv");
    ok(&["scatter", "--run", path(&run), "--out", path(&again)]);
    assert_eq!(
        std::fs::read(run.join("scatter.csv")).unwrap(),
        std::fs::read(&again).unwrap()
    );
    let extra = tmp.path().join("extra.csv");
    ok(&[
        "scatter",
        "--run",
        path(&run),
        "--betas",
        "4",
        "--out",
        path(&extra),
    ]);
    let text = std::fs::read_to_string(extra).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("4")));
}

#[test]
fn gradcheck_and_sweep_run() {
    let text = ok(&["gradcheck", "--trials", "2", "--seed", "5"]);
    assert!(text.contains("macrosoft(beta=1.0),balanced"));

    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep-beta", "--betas", "1,3", "--repeats", "2"];
    args.extend(SMALL);
    args.extend(["--out", path(tmp.path())]);
    ok(&args);
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("beta,repeats,recall,precision,f_beta")
    );
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn help_lists_defaults() {
    let text = ok(&["train", "--help"]);
    for needle in [
        "[default: 120]",
        "[default: 100]",
        "[default: 0.01]",
        "[default: 0.9]",
        "[default: 0.0001]",
        "[default: 0.1]",
    ] {
        assert!(text.contains(needle), "{needle} missing from help");
    }
}
