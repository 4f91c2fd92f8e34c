use std::path::Path;
use std::process::{Command, Output};

use medcorpus::benchmark::write_codes_csv;
use medcorpus::corpus::write_documents;
use medcorpus::synth;

fn medcorpus(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medcorpus"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        medcorpus(&["frobnicate"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        medcorpus(&["pretrain-config", "--phase", "3"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(medcorpus(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = medcorpus(&["dedup", "nope.jsonl", "--out", "x.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pretrain_config_phase_two_has_null_lr() {
    let dir = tempfile::tempdir().unwrap();
    let json: serde_json::Value = serde_json::from_str(&ok(&medcorpus(
        &["pretrain-config", "--phase", "2"],
        dir.path(),
    )))
    .unwrap();
    assert!(json["learning_rate"].is_null());
    assert_eq!(json["batch_size"], 32768);
    assert_eq!(json["seq_len"], 512);
}

#[test]
fn dedup_and_anonymize_commands() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth::near_duplicate_corpus(500, 0.1, 3);
    write_documents(dir.path().join("docs.jsonl"), &corpus.docs).unwrap();
    ok(&medcorpus(
        &[
            "dedup",
            "docs.jsonl",
            "--threshold",
            "0.75",
            "--mode",
            "representative",
            "--max-words",
            "128",
            "--out",
            "kept.jsonl",
            "--report",
            "report.json",
        ],
        dir.path(),
    ));
    let kept = std::fs::read_to_string(dir.path().join("kept.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 500 - corpus.n_planted);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report
        .to_string()
        .contains(&format!("\"n_removed\":{}", corpus.n_planted)));

    let names = synth::name_date_corpus(50, 4);
    write_documents(dir.path().join("names.jsonl"), &names.docs).unwrap();
    std::fs::write(dir.path().join("gazetteer.txt"), names.gazetteer.join("\n")).unwrap();
    ok(&medcorpus(
        &[
            "anonymize",
            "names.jsonl",
            "--gazetteer",
            "gazetteer.txt",
            "--out",
            "anon.jsonl",
            "--report",
            "anon.json",
        ],
        dir.path(),
    ));
    let anon = std::fs::read_to_string(dir.path().join("anon.jsonl")).unwrap();
    for name in synth::LAST_NAMES {
        assert!(!anon.contains(name), "{name} survived");
    }
}

#[test]
fn vocab_tokenize_fertility_commands() {
    let dir = tempfile::tempdir().unwrap();
    let docs: Vec<_> = synth::clinical_corpus(2_000, 1)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            medcorpus::corpus::RawDocument::new(
                format!("s{i}"),
                medcorpus::corpus::SourceKind::Other("notes".into()),
                t,
            )
        })
        .collect();
    write_documents(dir.path().join("notes.jsonl"), &docs).unwrap();
    ok(&medcorpus(
        &[
            "vocab",
            "build",
            "notes.jsonl",
            "--vocab-size",
            "500",
            "--out",
            "vocab.txt",
        ],
        dir.path(),
    ));
    let vocab = std::fs::read_to_string(dir.path().join("vocab.txt")).unwrap();
    assert_eq!(vocab.lines().count(), 500);
    assert_eq!(vocab.lines().next(), Some("[PAD]"));
    ok(&medcorpus(
        &[
            "tokenize",
            "notes.jsonl",
            "--vocab",
            "vocab.txt",
            "--out",
            "tokens.jsonl",
        ],
        dir.path(),
    ));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("tokens.jsonl"))
            .unwrap()
            .lines()
            .count(),
        2_000
    );
    let stdout = ok(&medcorpus(
        &[
            "fertility",
            "notes.jsonl",
            "--vocab",
            "vocab.txt",
            "--json",
            "fert.json",
        ],
        dir.path(),
    ));
    assert!(stdout.contains("fertility"), "{stdout}");
}

#[test]
fn bench_build_and_eval_clf() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth::coded_corpus(2_000, 11);
    write_documents(dir.path().join("docs.jsonl"), &corpus.docs).unwrap();
    write_codes_csv(dir.path().join("codes.csv"), &corpus.codes).unwrap();
    ok(&medcorpus(
        &[
            "bench",
            "build",
            "--docs",
            "docs.jsonl",
            "--codes",
            "codes.csv",
            "--chapter",
            "5-",
            "--system",
            "ops",
            "--seed",
            "1",
            "--out",
            "task",
        ],
        dir.path(),
    ));
    let task = dir.path().join("task");
    let count = |f: &str| {
        std::fs::read_to_string(task.join(f))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(
        (
            count("train.jsonl"),
            count("valid.jsonl"),
            count("test.jsonl")
        ),
        (1000, 500, 500)
    );
    assert!(std::fs::read_to_string(task.join("distribution.tsv"))
        .unwrap()
        .starts_with("Class\tTrain\tValid\tTest"));

    // a perfect scorer
    let mut preds = String::new();
    for line in std::fs::read_to_string(task.join("test.jsonl"))
        .unwrap()
        .lines()
    {
        let ex: serde_json::Value = serde_json::from_str(line).unwrap();
        let gold: Vec<&str> = ex["labels"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l.as_str().unwrap())
            .collect();
        let scores: serde_json::Map<String, serde_json::Value> =
            std::fs::read_to_string(task.join("labels.txt"))
                .unwrap()
                .lines()
                .map(|l| {
                    (
                        l.to_string(),
                        serde_json::json!(if gold.contains(&l) { 0.9 } else { 0.1 }),
                    )
                })
                .collect();
        preds.push_str(&serde_json::json!({"id": ex["id"], "scores": scores}).to_string());
        preds.push('\n');
    }
    std::fs::write(task.join("pred.jsonl"), preds).unwrap();
    let tsv = ok(&medcorpus(
        &[
            "eval",
            "clf",
            "--gold",
            "task/test.jsonl",
            "--pred",
            "task/pred.jsonl",
            "--labels",
            "task/labels.txt",
        ],
        dir.path(),
    ));
    assert!(
        tsv.starts_with("Class\tAUROC\tF1\tPrecision\tRecall\n"),
        "{tsv}"
    );
    assert!(
        tsv.lines()
            .any(|l| l == "Macro\t100.0\t100.0\t100.0\t100.0"),
        "{tsv}"
    );
}

#[test]
fn hpo_run_with_shell_objective_in_parallel_waves() {
    let dir = tempfile::tempdir().unwrap();
    // value grows with the batch size, so small batches get pruned
    let script = "#!/bin/sh\nfor s in 1 2 3; do echo \"step=$s value=$(( HPO_BATCH_SIZE * s ))\"; done\necho \"final=$(( HPO_BATCH_SIZE * 3 ))\"\n";
    std::fs::write(dir.path().join("objective.sh"), script).unwrap();
    let run = |study: &str| {
        ok(&medcorpus(
            &[
                "hpo",
                "run",
                "--cmd",
                "sh objective.sh",
                "--trials",
                "12",
                "--seed",
                "5",
                "--parallel",
                "3",
                "--study",
                study,
            ],
            dir.path(),
        ))
    };
    run("a.json");
    run("b.json");
    let a = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    assert_eq!(
        a,
        std::fs::read_to_string(dir.path().join("b.json")).unwrap()
    );
    let study: serde_json::Value = serde_json::from_str(&a).unwrap();
    let trials = study["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 12);
    assert!(trials.iter().all(|t| t["state"] != "failed"), "{a}");
}

#[test]
fn pipeline_command_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline");
    for f in ["reports.jsonl", "names.txt", "config.json"] {
        std::fs::copy(fixture.join(f), dir.path().join(f)).unwrap();
    }
    ok(&medcorpus(&["pipeline", "config.json"], dir.path()));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["complete"], true);
    assert!(dir.path().join("out/05-stats.tsv").exists());
}
