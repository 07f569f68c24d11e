use std::path::Path;
use std::process::{Command, Output};

fn nerboot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nerboot"))
        .current_dir(dir)
        .env("NERBOOT_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = nerboot(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth_split(dir: &Path, n: &str) {
    ok(dir, &["synth", "--sentences", n, "--seed", "3", "-o", "all.bio"]);
    ok(dir, &["dataset", "split", "--input", "all.bio", "--out-dir", "data"]);
}

#[test]
fn stats_of_a_two_sentence_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("two.bio"),
        "Ali B-PER\nke O\nKuala B-LOC\nLumpur I-LOC\n\nBank B-ORG\nNegara I-ORG\ndi O\nIpoh B-LOC\n",
    )
    .unwrap();
    let text = ok(dir.path(), &["dataset", "stats", "--input", "two.bio"]);
    assert!(text.contains("sentences\t2"), "{text}");
    assert!(text.contains("tokens\t8"));
    let json: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["dataset", "stats", "--input", "two.bio", "--json"])).unwrap();
    assert_eq!(json["entity_counts"]["LOC"], 2);
    assert_eq!(json["entity_counts"]["PER"], 1);
    assert_eq!(json["entity_counts"]["ORG"], 1);
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_split(d, "150");
    for run in ["a", "b"] {
        ok(d, &["--run-dir", run, "train", "--train", "data/train.bio", "--epochs", "2", "--seed", "9"]);
    }
    let a = std::fs::read(d.join("a/model/model.ckpt")).unwrap();
    let b = std::fs::read(d.join("b/model/model.ckpt")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a/run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 9);
    assert_eq!(record["command"], "train");
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);

    let eval = ok(d, &["--run-dir", "e", "eval", "--model", "a/model", "--data", "data/test.bio"]);
    assert!(eval.contains("micro\t"));
    assert!(d.join("e/metrics.json").exists());
}

#[test]
fn ablation_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_split(d, "100");
    let tsv = ok(
        d,
        &[
            "--run-dir", "abl", "ablate", "--train", "data/train.bio", "--test", "data/test.bio", "--seeds", "1",
            "--epochs", "1",
        ],
    );
    assert_eq!(tsv.lines().count(), 6, "{tsv}");
    assert!(tsv.lines().last().unwrap().starts_with("MTBR\t1\t"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("abl/ablation.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
    assert_eq!(json["runs"].as_array().unwrap().len(), 5);
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    let cmds: &[&[&str]] = &[
        &[],
        &["vocab", "build"],
        &["bootstrap", "filter"],
        &["bootstrap", "rules"],
        &["dataset", "split"],
        &["dataset", "stats"],
        &["dataset", "validate"],
        &["train"],
        &["eval"],
        &["ablate"],
        &["iterate"],
        &["serve"],
        &["synth"],
    ];
    for c in cmds {
        let mut args = c.to_vec();
        args.push("--help");
        let out = ok(dir.path(), &args);
        assert!(out.contains("Usage"), "{c:?}");
    }
    assert!(nerboot(dir.path(), &["--version"]).status.success());
}

#[test]
fn exit_codes_distinguish_usage_data_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(nerboot(d, &["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(nerboot(d, &[]).status.code(), Some(1));
    // no training file anywhere
    assert_eq!(nerboot(d, &["train"]).status.code(), Some(1));
    assert_eq!(nerboot(d, &["train", "--train", "x.bio", "--variant", "nope"]).status.code(), Some(1));

    std::fs::write(d.join("bad.toml"), "[hyper]\nlearning = 3\n").unwrap();
    let out = nerboot(d, &["--config", "bad.toml", "dataset", "stats", "--input", "x.bio"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning"));

    std::fs::write(d.join("bad.bio"), "Ali I-PER\n").unwrap();
    let out = nerboot(d, &["dataset", "validate", "--input", "bad.bio"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("illegal transition"));
    assert_eq!(nerboot(d, &["dataset", "stats", "--input", "missing.bio"]).status.code(), Some(2));
    std::fs::write(d.join("few.bio"), "Ali B-PER\n").unwrap();
    assert_eq!(nerboot(d, &["dataset", "split", "--input", "few.bio"]).status.code(), Some(2));
    // missing input is caught before any run directory is made
    assert!(!d.join("runs").exists());
}

#[test]
fn config_file_supplies_paths_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_split(d, "100");
    std::fs::write(
        d.join("run.toml"),
        "[paths]\ntrain = \"data/train.bio\"\nruns_dir = \"out\"\n[hyper]\nepochs = 1\nseed = 4\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "train", "--seed", "5"]);
    let runs: Vec<_> = std::fs::read_dir(d.join("out")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let run = runs[0].as_ref().unwrap().path();
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 5);
    assert_eq!(record["config"]["hyper"]["epochs"], 1);
    assert!(run.join("model/model.ckpt").exists());
}

#[test]
fn iterate_queues_disagreements_and_merges_resolutions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_split(d, "100");
    let out = ok(
        d,
        &["--run-dir", "i1", "iterate", "--dataset", "data/train.bio", "--store", "audit.jsonl", "--epochs", "1"],
    );
    assert!(out.starts_with("iteration 1:"), "{out}");
    let store = std::fs::read_to_string(d.join("audit.jsonl")).unwrap();
    assert!(store.lines().last().unwrap().contains("\"kind\":\"report\""));
    let out = ok(
        d,
        &["--run-dir", "i2", "iterate", "--dataset", "data/train.bio", "--store", "audit.jsonl", "--epochs", "1"],
    );
    assert!(out.starts_with("iteration 2:"), "{out}");
    assert!(d.join("i2/dataset.jsonl").exists());
}
