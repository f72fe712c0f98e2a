use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meed::metrics::{MetricsReport, REPORT_KEYS};

fn meed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "\
seed = 3
out = run
[data]
kind = sparse-logit
d = 8
n_true = 3
n = 600
[model]
hidden = 16
epochs = 10
[train]
k = 3
epochs = 3
explainer_hidden = 16
approximator_hidden = 16
[eval]
retrain_epochs = 2
n_perturb = 4
sen_samples = 10
timing_samples = 5
";

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn with_epochs(epochs: usize) -> String {
    SMALL.replace(
        "[train]\nk = 3\nepochs = 3",
        &format!("[train]\nk = 3\nepochs = {epochs}"),
    )
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = meed(dir.path(), &["train", "--config", "nowhere.conf"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nowhere.conf"), "{}", stderr(&o));
}

#[test]
fn bad_key_exits_2_naming_the_key() {
    let (dir, _) = setup(&SMALL.replace("n = 600", "n = 600\nwidth = 3"));
    let o = meed(dir.path(), &["train", "--config", "run.conf"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("data.width"), "{}", stderr(&o));
}

#[test]
fn zero_epochs_writes_the_initial_checkpoint() {
    let (dir, _) = setup(&with_epochs(0));
    let o = meed(dir.path(), &["train", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ckpt = meed::trainer::Checkpoint::load(&dir.path().join("run/checkpoint.bin")).unwrap();
    assert_eq!(ckpt.epoch, 0);
    assert_eq!(fs::read_to_string(dir.path().join("run/train.log")).unwrap(), "");
}

#[test]
fn training_logs_increasing_epochs_and_explains_every_sample() {
    let (dir, _) = setup(SMALL);
    let o = meed(dir.path(), &["train", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = fs::read_to_string(dir.path().join("run/train.log")).unwrap();
    let epochs: Vec<usize> = log
        .lines()
        .map(|l| {
            l.strip_prefix("epoch=")
                .unwrap()
                .split(' ')
                .next()
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect();
    assert_eq!(epochs, vec![0, 1, 2]);

    let o = meed(dir.path(), &["synth", "--config", "run.conf", "--out", "synth"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let n = fs::read_to_string(dir.path().join("synth/data.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count();

    let args = [
        "explain",
        "--checkpoint",
        "run/checkpoint.bin",
        "--data",
        "synth/data.csv",
        "--k",
        "8",
        "--out",
        "ex",
    ];
    let o = meed(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read_to_string(dir.path().join("ex/explanations.txt")).unwrap();
    assert_eq!(first.lines().count(), n);
    for line in first.lines() {
        let parts: Vec<&str> = line.split(' ').collect();
        assert!(parts[0].starts_with("id="));
        assert_eq!(parts[1], "selected=0;1;2;3;4;5;6;7");
        let scores = parts[2].strip_prefix("scores=").unwrap().split(';').collect::<Vec<_>>();
        assert_eq!(scores.len(), 8);
        assert!(scores.iter().all(|s| s.split('.').nth(1).unwrap().len() == 4));
    }
    meed(dir.path(), &args);
    assert_eq!(
        fs::read_to_string(dir.path().join("ex/explanations.txt")).unwrap(),
        first
    );

    // A dataset with a different width is a shape mismatch.
    let other = SMALL.replace("d = 8", "d = 9").replace("out = run", "out = other");
    fs::write(dir.path().join("other.conf"), other).unwrap();
    assert_eq!(code(&meed(dir.path(), &["synth", "--config", "other.conf"])), 0);
    let o = meed(
        dir.path(),
        &[
            "explain",
            "--checkpoint",
            "run/checkpoint.bin",
            "--data",
            "other/data.csv",
            "--model",
            "run/model.bin",
        ],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let (dir, _) = setup(SMALL);
    meed(dir.path(), &["synth", "--config", "run.conf", "--out", "a"]);
    meed(dir.path(), &["synth", "--config", "run.conf", "--out", "b"]);
    let a = fs::read(dir.path().join("a/data.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(dir.path().join("b/data.csv")).unwrap());
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let (dir, _) = setup(&with_epochs(4));
    fs::write(
        dir.path().join("half.conf"),
        with_epochs(2).replace("out = run", "out = half"),
    )
    .unwrap();
    assert_eq!(code(&meed(dir.path(), &["train", "--config", "run.conf"])), 0);
    assert_eq!(code(&meed(dir.path(), &["train", "--config", "half.conf"])), 0);
    let o = meed(
        dir.path(),
        &[
            "train",
            "--config",
            "run.conf",
            "--out",
            "resumed",
            "--checkpoint",
            "half/checkpoint.bin",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let full = fs::read(dir.path().join("run/checkpoint.bin")).unwrap();
    let resumed = fs::read(dir.path().join("resumed/checkpoint.bin")).unwrap();
    assert!(full == resumed, "resumed checkpoint differs");
}

#[test]
fn evaluate_sanity_and_ablate_write_reports() {
    let (dir, _) = setup(SMALL);
    assert_eq!(code(&meed(dir.path(), &["train", "--config", "run.conf"])), 0);

    let o = meed(dir.path(), &["evaluate", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("run/report.txt")).unwrap();
    for key in REPORT_KEYS {
        assert_eq!(
            text.lines().filter(|l| l.starts_with(&format!("{key}="))).count(),
            1,
            "{key}"
        );
    }
    let report: MetricsReport = text.parse().unwrap();
    assert_eq!(report.k, 3);

    let o = meed(dir.path(), &["sanity", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sanity: MetricsReport = fs::read_to_string(dir.path().join("run/sanity.txt"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(sanity.sanity_model.is_some() && sanity.sanity_data.is_some());

    let o = meed(dir.path(), &["ablate", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reports: Vec<MetricsReport> = ["full", "wo-output", "wo-ail", "wo-prior"]
        .iter()
        .map(|v| {
            fs::read_to_string(dir.path().join(format!("run/ablation-{v}.txt")))
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect();
    assert!(reports
        .iter()
        .all(|r| r.k == reports[0].k && r.n_eval == reports[0].n_eval));
}
