//! Drives the `aid` binary through every stage and checks exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn aid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aid")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = aid(args);
    assert!(
        out.status.success(),
        "aid {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn stages_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("synth.toml"),
        "n_accents = 3\nspeakers_per_accent = 4\nutterances_per_speaker = 4\nframe_dim = 6\nframes_min = 2\nframes_max = 4\n",
    )
    .unwrap();
    std::fs::write(d.join("train.toml"), "epochs = 2\nhidden = [16, 8, 8]\n").unwrap();

    let corpus = d.join("corpus");
    ok(&[
        "gen-corpus",
        "--config",
        p(&d.join("synth.toml")),
        "--out",
        p(&corpus),
        "--seed",
        "3",
    ]);
    ok(&["split", "--corpus", p(&corpus), "--out", p(&d.join("split.json"))]);
    let stdout = ok(&[
        "augment",
        "--corpus",
        p(&corpus),
        "--split",
        p(&d.join("split.json")),
        "--engine",
        "knn",
        "--k",
        "2",
        "--out",
        p(&d.join("aug")),
    ]);
    assert!(stdout.contains("converted utterances added"));
    let aug_split = d.join("aug").join("split.json");
    ok(&[
        "train",
        "--corpus",
        p(&d.join("aug")),
        "--split",
        p(&aug_split),
        "--config",
        p(&d.join("train.toml")),
        "--out",
        p(&d.join("model.aidm")),
    ]);
    let report = ok(&[
        "eval",
        "--corpus",
        p(&d.join("aug")),
        "--split",
        p(&aug_split),
        "--model",
        p(&d.join("model.aidm")),
        "--out",
        p(&d.join("test.tsv")),
    ]);
    assert!(report.contains("macro"));
    assert!(d.join("test.tsv").exists());
}

#[test]
fn run_matrix_writes_comparison_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let matrix = r#"
[[experiments]]
name = "plain"
[experiments.corpus]
source = "synthetic"
[experiments.corpus.synth]
n_accents = 3
speakers_per_accent = 4
utterances_per_speaker = 3
frame_dim = 6
[experiments.training]
epochs = 1
hidden = [8, 8, 8]

[[experiments]]
name = "oracle"
augmentation = "oracle"
[experiments.corpus]
source = "synthetic"
[experiments.corpus.synth]
n_accents = 3
speakers_per_accent = 4
utterances_per_speaker = 3
frame_dim = 6
[experiments.training]
epochs = 1
hidden = [8, 8, 8]
"#;
    std::fs::write(d.join("matrix.toml"), matrix).unwrap();
    let out = d.join("out");
    let table = ok(&["run-matrix", "--config", p(&d.join("matrix.toml")), "--out", p(&out)]);
    assert!(table.find("plain").unwrap() < table.find("oracle").unwrap());
    let tsv = std::fs::read_to_string(out.join("comparison.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);
    assert!(out.join("plain").join("run.json").exists());
    assert!(out.join("oracle").join("model.aidm").exists());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Missing config: configuration error.
    assert_eq!(aid(&["run"]).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(aid(&["run", "--config", p(&d.join("bad.toml"))]).status.code(), Some(2));
    // Unreadable corpus: data error.
    std::fs::create_dir(d.join("empty")).unwrap();
    let out = aid(&["split", "--corpus", p(&d.join("empty")), "--out", p(&d.join("s.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
