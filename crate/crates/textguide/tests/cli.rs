//! End-to-end tests of the command-line interface, including CLI/library
//! equivalence and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use textguide::boost::BoostParams;
use textguide::corpus::{load_corpus, tokenize, write_corpus, CorpusFormat};
use textguide::evaluation::{compare_strategies, EvalConfig, LeakageMode};
use textguide::importance::ImportanceBackend;
use textguide::truncation::{apply_strategy, Strategy, TruncationConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_textguide"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_demo_corpus(path: &Path, single_class: bool) {
    let rows: Vec<textguide::corpus::TextInstance> = (0..30)
        .map(|i| {
            let label = if single_class || i % 2 == 0 { "a" } else { "b" };
            let marker = if i % 2 == 0 { "appleword" } else { "orangeword" };
            let filler: Vec<String> = (0..40).map(|j| format!("w{}", (i + j * 3) % 25)).collect();
            textguide::corpus::TextInstance {
                id: i.to_string(),
                text: format!("{} {}", marker, filler.join(" ")),
                label: label.to_string(),
            }
        })
        .collect();
    let corpus = textguide::corpus::Corpus::from_instances(rows).unwrap();
    write_corpus(&corpus, path, CorpusFormat::Jsonl).unwrap();
}

#[test]
fn build_sitfl_writes_well_formed_deterministic_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let out1 = dir.path().join("a.sitfl");
    let out2 = dir.path().join("b.sitfl");
    for out in [&out1, &out2] {
        let output = run(&[
            "build-sitfl",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--min-df",
            "1",
            "--n-features",
            "30",
            "--rounds",
            "10",
            "--min-samples-leaf",
            "2",
            "--seed",
            "7",
        ]);
        assert!(output.status.success(), "{output:?}");
        let stdout = String::from_utf8(output.stdout).unwrap();
        assert!(stdout.contains("classes = 2"));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical sITFL files");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("#textguide-sitfl v1 n=30 corpus_sha256="));
}

#[test]
fn build_sitfl_single_class_exits_nonzero_naming_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, true);
    let out = dir.path().join("a.sitfl");
    let output = run(&[
        "build-sitfl",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--min-df",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("DegenerateTraining"), "{stderr}");
}

#[test]
fn truncate_head_respects_budget_and_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let out = dir.path().join("trunc.jsonl");
    let output = run(&[
        "truncate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--strategy",
        "head",
        "--nta",
        "12",
    ]);
    assert!(output.status.success(), "{output:?}");
    let truncated = load_corpus(&out, CorpusFormat::Jsonl).unwrap();
    for inst in &truncated.instances {
        assert!(tokenize(&inst.text).len() <= 12);
    }
    let original = load_corpus(&input, CorpusFormat::Jsonl).unwrap();
    let cfg = TruncationConfig::new(12, 0.2, 0.1, 2, Some(1.5)).unwrap();
    let expected = apply_strategy(&original, Strategy::Head, None, &cfg).unwrap();
    assert_eq!(truncated, expected.corpus);
}

#[test]
fn truncate_text_guide_without_sitfl_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let output = run(&[
        "truncate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("x.jsonl").to_str().unwrap(),
        "--strategy",
        "text_guide",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_strategy_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let output = run(&[
        "compare",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("x.json").to_str().unwrap(),
        "--strategies",
        "head,bogus",
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    for name in Strategy::NAMES {
        assert!(stderr.contains(name), "{stderr}");
    }
}

#[test]
fn sweep_singleton_grid_writes_one_row_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let out1 = dir.path().join("s1.csv");
    let out2 = dir.path().join("s2.csv");
    for out in [&out1, &out2] {
        let output = run(&[
            "sweep",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--nta",
            "8",
            "--folds",
            "3",
            "--min-df",
            "1",
            "--n-features",
            "20",
            "--rounds",
            "5",
            "--min-samples-leaf",
            "2",
            "--part1-grid",
            "0.2",
            "--part2-grid",
            "0.1",
            "--tn-grid",
            "2",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let a = std::fs::read_to_string(&out1).unwrap();
    assert_eq!(a, std::fs::read_to_string(&out2).unwrap());
    assert_eq!(a.lines().count(), 2, "header plus one data row: {a}");
    assert!(a.starts_with("part1,part2,tn,mean_mcc,fold_mccs"));
}

#[test]
fn compare_matches_library_results() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let out = dir.path().join("cmp.json");
    let output = run(&[
        "compare",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--strategies",
        "head,tail",
        "--nta",
        "10",
        "--folds",
        "3",
        "--min-df",
        "1",
        "--n-features",
        "20",
        "--rounds",
        "5",
        "--min-samples-leaf",
        "2",
        "--seed",
        "9",
    ]);
    assert!(output.status.success(), "{output:?}");
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let corpus = load_corpus(&input, CorpusFormat::Jsonl).unwrap();
    let cfg = EvalConfig {
        k: 3,
        seed: 9,
        n_features: 20,
        min_df: 1,
        boost: BoostParams {
            rounds: 5,
            min_samples_leaf: 2,
            seed: 9,
            ..Default::default()
        },
        leakage: LeakageMode::FoldSafe,
        backend: ImportanceBackend::Boost,
    };
    let tc = TruncationConfig::new(10, 0.2, 0.1, 2, Some(1.5)).unwrap();
    let expected = compare_strategies(
        &corpus,
        &[(Strategy::Head, tc.clone()), (Strategy::Tail, tc)],
        &cfg,
    )
    .unwrap();
    let expected_json: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&expected).unwrap()).unwrap();
    assert_eq!(written, expected_json);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "input = {}\nnta = 7  # comment\nstrategy = head\n",
            input.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("t.jsonl");
    let output = run(&[
        "truncate",
        "--config",
        config.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--nta",
        "5",
    ]);
    assert!(output.status.success(), "{output:?}");
    let truncated = load_corpus(&out, CorpusFormat::Jsonl).unwrap();
    // the flag's nta=5 must win over the file's nta=7
    for inst in &truncated.instances {
        assert!(tokenize(&inst.text).len() <= 5);
    }
}

#[test]
fn truncate_writes_provenance_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_demo_corpus(&input, false);
    let sitfl = dir.path().join("a.sitfl");
    assert!(run(&[
        "build-sitfl",
        "--input",
        input.to_str().unwrap(),
        "--output",
        sitfl.to_str().unwrap(),
        "--min-df",
        "1",
        "--n-features",
        "20",
        "--rounds",
        "5",
        "--min-samples-leaf",
        "2",
    ])
    .status
    .success());
    let out = dir.path().join("t.jsonl");
    let sidecar = dir.path().join("prov.jsonl");
    let output = run(&[
        "truncate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--strategy",
        "text_guide",
        "--sitfl",
        sitfl.to_str().unwrap(),
        "--nta",
        "10",
        "--provenance",
        sidecar.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let body = std::fs::read_to_string(&sidecar).unwrap();
    assert_eq!(body.lines().count(), 30);
    let first: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
    assert_eq!(first["strategy"], "text_guide");
    assert!(first["segments"].as_array().unwrap().iter().all(|s| {
        ["head", "group", "tail", "pad"].contains(&s["kind"].as_str().unwrap())
    }));
}
