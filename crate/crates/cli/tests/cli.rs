use std::path::Path;
use std::process::{Command, Output};

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/toy_corpus.jsonl");

fn evsynth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evsynth")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn validate_reports_counts_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = evsynth(dir.path(), &["--json", "corpus", "validate", TOY]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reviews"], 14);
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&evsynth(dir.path(), &["corpus", "validate", "missing.jsonl"])), 7);
    assert_eq!(code(&evsynth(dir.path(), &["corpus", "frobnicate"])), 2);
    assert_eq!(code(&evsynth(dir.path(), &["summarize", TOY, "--out", "s.jsonl", "--backend", "remote"])), 4);

    std::fs::write(dir.path().join("bad.jsonl"), "{\"review_id\": \"x\"}\n").unwrap();
    let out = evsynth(dir.path(), &["corpus", "validate", "bad.jsonl"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[input]"));

    std::fs::write(dir.path().join("run.toml"), "bogus = 1\n").unwrap();
    assert_eq!(code(&evsynth(dir.path(), &["--config", "run.toml", "corpus", "validate", TOY])), 4);
}

#[test]
fn split_partitions_every_review() {
    let dir = tempfile::tempdir().unwrap();
    let out = evsynth(dir.path(), &["--json", "corpus", "split", TOY, "--out-dir", "splits", "--fractions", "0.5,0.25,0.25"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let total = ["train", "dev", "test"].iter().map(|k| v[k].as_u64().unwrap()).sum::<u64>();
    assert_eq!(total, 14);
    for name in ["train", "dev", "test"] {
        assert!(dir.path().join(format!("splits/{name}.jsonl")).exists());
    }
}

#[test]
fn kappa_of_an_annotator_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = [("r1", "a", 2), ("r1", "b", 4), ("r2", "a", 5), ("r2", "b", 1)]
        .iter()
        .map(|(r, s, v)| {
            format!(
                "{{\"annotator_id\":\"u1\",\"review_id\":\"{r}\",\"system_id\":\"{s}\",\"question\":\"factual_agreement\",\"value\":{v},\"timestamp\":\"2026-01-01T00:00:00.000Z\"}}\n"
            )
        })
        .collect();
    std::fs::write(dir.path().join("export.jsonl"), rows).unwrap();
    let out = evsynth(
        dir.path(),
        &["--json", "stats", "kappa", "--export", "export.jsonl", "--question", "factual_agreement", "--annotators", "u1", "u1"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kappa"], 1.0);
    assert_eq!(v["items"], 4);

    let out = evsynth(
        dir.path(),
        &["stats", "ttest", "--scores", "export.jsonl", "--question", "factual_agreement", "--x", "a", "--y", "b"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("over 2 pairs"));
}

#[test]
fn train_classifier_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = evsynth(dir.path(), &["train-classifier", "--label-space", "direction", "--out", "dir.json", "--epochs", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = evsynth::metrics::LinearTextClassifier::load(dir.path().join("dir.json")).unwrap();
    assert_eq!(model.label_space, evsynth::metrics::LabelSpace::Direction);

    std::fs::write(dir.path().join("s.jsonl"), "").unwrap();
    let wrong = evsynth(
        dir.path(),
        &["eval", "findings-jsd", "--candidates", "s.jsonl", "--references", TOY, "--selector", "dir.json"],
    );
    assert_eq!(code(&wrong), 4);
}
