use std::path::Path;
use std::process::{Command, Output};

fn ahcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahcr")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, per_class: &str) {
    let out = ahcr(&["synth-data", "--seed", "1", "--per-class", per_class, "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_lists_every_config_key_with_defaults() {
    let out = ahcr(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "learning_rate", "momentum", "weight_decay", "batch_size", "max_epochs", "widths", "dropout_rate",
        "svm_reg_lambda", "svm_epochs", "train_images", "out_dir", "seed", "precision",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    for default in ["[default: 0.02]", "[default: 0.8]", "[default: 0.001]", "[default: 32]", "[default: 400]", "[default: 128,256,512]"] {
        assert!(text.contains(default), "missing {default}");
    }
    let sub = ahcr(&["train", "--help"]);
    assert!(String::from_utf8(sub.stdout).unwrap().contains("svm_dropout_rate"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&ahcr(&[])), 1);
    assert_eq!(code(&ahcr(&["frobnicate"])), 1);
    assert_eq!(code(&ahcr(&["train", "--synth", "--set", "no_such_key=1"])), 1);
    assert_eq!(code(&ahcr(&["train", "--synth", "--widths", "1,2"])), 1);
    // no data configured at all
    assert_eq!(code(&ahcr(&["train", "--epochs", "0"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "seed = 3\nlr = 0.1\n").unwrap();
    let out = ahcr(&["train", "--synth", "--config", s(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"lr\""));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ahcr(&["eval", "--synth", "--model", s(&dir.path().join("none.ahcr"))])), 2);

    let junk = dir.path().join("junk.ahcr");
    std::fs::write(&junk, b"AHCR1 certainly not a model").unwrap();
    let out = ahcr(&["eval", "--synth", "--model", s(&junk)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));

    let images = dir.path().join("img.csv");
    let labels = dir.path().join("lab.csv");
    std::fs::write(&images, "1,2,3\n").unwrap();
    std::fs::write(&labels, "1\n").unwrap();
    let out = ahcr(&[
        "train", "--epochs", "0", "--out", s(dir.path()),
        "--set", &format!("train_images={}", s(&images)),
        "--set", &format!("train_labels={}", s(&labels)),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("perfect square"));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "3");
    let out = ahcr(&[
        "train", "--data", s(&data), "--widths", "2,2,2", "--epochs", "3",
        "--set", "learning_rate=1e9", "--out", s(&dir.path().join("run")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn zero_epochs_saves_initial_model_and_empty_history() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    synth(&data, "3");
    let out = ahcr(&["train", "--data", s(&data), "--widths", "2,2,2", "--epochs", "0", "--out", s(&run)]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read_to_string(run.join("history.csv")).unwrap(),
        "epoch,train_loss,train_acc,test_acc\n"
    );
    assert!(run.join("model.ahcr").exists());
    assert!(run.join("softmax_summary.csv").exists());

    // no SVM section yet
    let out = ahcr(&["eval", "--data", s(&data), "--model", s(&run.join("model.ahcr")), "--head", "svm", "--out", s(&run)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("svm"));

    let feats = run.join("f.csv");
    let out = ahcr(&[
        "extract-features", "--data", s(&data), "--model", s(&run.join("model.ahcr")),
        "--split", "test", "--output", s(&feats),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&feats).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    let test_rows = std::fs::read_to_string(data.join("test_labels.csv")).unwrap().lines().count();
    assert_eq!(rows.len(), test_rows);
    assert!(rows.iter().all(|r| r.split(',').count() == 1025));

    let out = ahcr(&["predict", "--model", s(&run.join("model.ahcr")), "--images", s(&data.join("test_images.csv"))]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("row,class_id,class_name,cluster_id\n"));
    assert_eq!(stdout.lines().count(), test_rows + 1);
}

#[test]
fn desk_preset_sets_widths_and_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    synth(&data, "2");
    let out = ahcr(&["train", "--data", s(&data), "--preset", "desk", "--epochs", "0", "--out", s(&run)]);
    assert_eq!(code(&out), 0);
    let cfg = std::fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(cfg.contains("widths = 16,32,64"));
    assert!(cfg.contains("max_epochs = 0"));
}
