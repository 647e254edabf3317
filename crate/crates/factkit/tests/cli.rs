mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use factkit::facts::{format_raw, read_facts, read_predictions, write_facts};
use factkit::splitfile::read_split;
use factkit_core::taxonomy::{FactRecord, LabelSet, RawAnnotation};
use tempfile::TempDir;

fn factkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factkit"))
        .args(args)
        .env_remove("FACTKIT_EMBED_TOKEN")
        .output()
        .expect("run factkit")
}

fn ok(args: &[&str]) -> Output {
    let out = factkit(args);
    assert!(
        out.status.success(),
        "factkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Asserts the failure is one `error[category]: ...` line with the code.
fn assert_error(out: &Output, category: &str, code: i32) {
    let text = stderr(out);
    assert_eq!(out.status.code(), Some(code), "{text}");
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with(&format!("error[{category}]: ")), "{text}");
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = factkit(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    let out = factkit(&[]);
    assert_ne!(out.status.code(), Some(0));
    assert!(factkit(&["--help"]).status.success());
}

fn raw_fixture() -> String {
    let fact = |id: &str, text: &str| FactRecord::new(id, text).unwrap();
    let valid = RawAnnotation {
        categories: vec!["Preferences".into()],
        main_category: "Preferences".into(),
        time: "Present".into(),
        referent: "Self".into(),
        specificity: "Specific".into(),
        duration: vec!["Long-term".into()],
        context_sufficient: "Yes".into(),
        ..RawAnnotation::default()
    };
    let dual = RawAnnotation {
        duration: vec!["Short-term".into(), "Long-term".into()],
        ..valid.clone()
    };
    let broken = RawAnnotation {
        broken: "Yes".into(),
        broken_reason: "Not about self/known people".into(),
        ..valid.clone()
    };
    format_raw(&[
        (fact("a", "I love tea."), valid),
        (fact("b", "I moved to Berlin."), dual),
        (fact("c", "My neighbour's cousin likes jazz."), broken),
    ])
}

#[test]
fn canon_writes_facts_log_and_manifest() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("raw.jsonl");
    let out = dir.path().join("facts.jsonl");
    fs::write(&input, raw_fixture()).unwrap();
    ok(&["canon", "--input", s(&input), "--out", s(&out)]);

    let facts = read_facts(&out).unwrap();
    assert_eq!(facts.len(), 3);
    assert_eq!(facts[0].labels.unwrap().label(factkit_core::taxonomy::Dimension::MainCategory), "Preferences");
    assert!(facts[1].excluded);
    assert_eq!(
        facts[2].labels.unwrap(),
        LabelSet::invalid(factkit_core::taxonomy::InvalidityReason::Unattributable)
    );
    let log = fs::read_to_string(dir.path().join("facts.jsonl.exclusions.tsv")).unwrap();
    assert_eq!(log, "b\tdual-duration\n");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("facts.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "canon");
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn errors_are_single_categorized_lines() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = dir.path().join("out.jsonl");
    assert_error(&factkit(&["canon", "--input", s(&missing), "--out", s(&out)]), "io", 4);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, raw_fixture().replace("\"Preferences\"", "\"Hobbies\"")).unwrap();
    assert_error(&factkit(&["canon", "--input", s(&bad), "--out", s(&out)]), "canon", 6);

    let garbage = dir.path().join("garbage.jsonl");
    fs::write(&garbage, "{\"id\": \"x\"}\nnot json\n").unwrap();
    assert_error(&factkit(&["split", "--facts", s(&garbage), "--out", s(&out)]), "parse", 5);

    let config = dir.path().join("bad.toml");
    fs::write(&config, "seeds = []\n").unwrap();
    assert_error(
        &factkit(&["--config", s(&config), "split", "--facts", s(&garbage), "--out", s(&out)]),
        "config",
        3,
    );
    fs::write(&config, "[train]\nno_such_key = 1\n").unwrap();
    assert_error(
        &factkit(&["--config", s(&config), "split", "--facts", s(&garbage), "--out", s(&out)]),
        "config",
        3,
    );
}

struct Workspace {
    dir: TempDir,
    facts: PathBuf,
    emb: PathBuf,
    config: PathBuf,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let facts = dir.path().join("facts.jsonl");
        write_facts(&facts, &common::synthetic_facts(n)).unwrap();
        let emb = dir.path().join("facts.emb");
        let server = common::synthetic_server();
        ok(&["embed-fetch", "--facts", s(&facts), "--out", s(&emb), "--endpoint", &server.url, "--batch-size", "32"]);
        let config = dir.path().join("run.toml");
        fs::write(
            &config,
            "seeds = [42, 123]\n\n[train]\nlearning_rate = 0.02\nbatch_size = 16\n\n[sampling]\nk = 6\ncap = 2\n",
        )
        .unwrap();
        Workspace { dir, facts, emb, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", s(&self.config)];
        all.extend_from_slice(args);
        ok(&all)
    }
}

fn key_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn train_predict_eval_analyze_pipeline() {
    let ws = Workspace::new(160);
    let models = ws.path("models");
    ws.run(&["train", "--facts", s(&ws.facts), "--embeddings", s(&ws.emb), "--out-dir", s(&models)]);
    for seed in [42, 123] {
        for file in [format!("model-seed{seed}.ckpt"), format!("history-seed{seed}.tsv"), format!("split-seed{seed}.txt")] {
            assert!(models.join(&file).exists(), "{file}");
        }
    }
    let report = fs::read_to_string(models.join("report.txt")).unwrap();
    assert_eq!(key_value(&report, "runs"), 2.0);
    assert!(key_value(&report, "overall.mean") >= 0.95, "{report}");
    assert!(report.contains('±'));

    let mut predictions = Vec::new();
    for seed in [42, 123] {
        let pred = ws.path(&format!("pred-{seed}.jsonl"));
        let ckpt = models.join(format!("model-seed{seed}.ckpt"));
        ws.run(&["predict", "--model", s(&ckpt), "--embeddings", s(&ws.emb), "--facts", s(&ws.facts), "--out", s(&pred)]);
        assert_eq!(read_predictions(&pred).unwrap().len(), 160);
        predictions.push(pred);
    }

    let eval = ws.path("eval.txt");
    let split = models.join("split-seed42.txt");
    ws.run(&[
        "eval", "--facts", s(&ws.facts), "--predictions", s(&predictions[0]), "--split", s(&split), "--out", s(&eval),
    ]);
    let text = fs::read_to_string(&eval).unwrap();
    let (_, assignment) = read_split(&split).unwrap();
    assert!(key_value(&text, "overall.mean") >= 0.95, "{text}");
    let support: f64 = ["Valid", "Invalid"]
        .iter()
        .map(|l| key_value(&text, &format!("label.validity.{l}.support")))
        .sum();
    assert_eq!(support, assignment.test.len() as f64);

    let analysis = ws.path("analysis.txt");
    let train_facts = ws.path("train-facts.jsonl");
    let all = read_facts(&ws.facts).unwrap();
    write_facts(&train_facts, &all[..40]).unwrap();
    let ckpts: Vec<PathBuf> = [42, 123].iter().map(|s| models.join(format!("model-seed{s}.ckpt"))).collect();
    ws.run(&[
        "analyze", "--models", s(&ckpts[0]), s(&ckpts[1]), "--corpus", s(&ws.facts), "--embeddings", s(&ws.emb),
        "--train-facts", s(&train_facts), "--out", s(&analysis),
    ]);
    let text = fs::read_to_string(&analysis).unwrap();
    assert_eq!(key_value(&text, "audit.overlap_count"), 40.0);
    assert_eq!(key_value(&text, "seeds"), 2.0);
    let validity: f64 = ["Valid", "Invalid"]
        .iter()
        .map(|l| key_value(&text, &format!("share.Validity.{l}.mean")))
        .sum();
    assert!((validity - 100.0).abs() < 1e-6, "{validity}");
}

#[test]
fn reruns_are_byte_identical() {
    let ws = Workspace::new(100);
    for out in ["a", "b"] {
        ws.run(&["train", "--facts", s(&ws.facts), "--embeddings", s(&ws.emb), "--out-dir", s(&ws.path(out)), "--seeds", "7", "--epochs", "3"]);
        ws.run(&["baseline", "--facts", s(&ws.facts), "--out-dir", s(&ws.path(out)), "--seeds", "7"]);
        ws.run(&["split", "--facts", s(&ws.facts), "--out", s(&ws.path(out).join("split.txt"))]);
        ws.run(&[
            "sample", "--facts", s(&ws.facts), "--embeddings", s(&ws.emb), "--out", s(&ws.path(out).join("sample.jsonl")),
        ]);
    }
    for file in [
        "model-seed7.ckpt",
        "history-seed7.tsv",
        "split-seed7.txt",
        "report.txt",
        "baseline-report.txt",
        "split.txt",
        "sample.jsonl",
    ] {
        let a = fs::read(ws.path("a").join(file)).unwrap();
        let b = fs::read(ws.path("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("a").join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert!(manifest["created_unix"].as_u64().unwrap() > 0);
}

#[test]
fn sample_respects_cap() {
    let ws = Workspace::new(60);
    let out = ws.path("sample.jsonl");
    ws.run(&["sample", "--facts", s(&ws.facts), "--embeddings", s(&ws.emb), "--out", s(&out)]);
    let sampled = read_facts(&out).unwrap();
    assert!(!sampled.is_empty() && sampled.len() <= 12, "{}", sampled.len());
}

#[test]
fn agree_between_two_label_files() {
    let ws = Workspace::new(40);
    let mut other = read_facts(&ws.facts).unwrap();
    for f in other.iter_mut().step_by(5) {
        f.labels = Some(LabelSet::invalid(factkit_core::taxonomy::InvalidityReason::Opinion));
    }
    let second = ws.path("rater2.jsonl");
    write_facts(&second, &other).unwrap();
    let out = ws.path("agree.txt");
    ws.run(&["agree", "--labels", s(&ws.facts), s(&second), "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("Cohen's κ"));
    assert_eq!(key_value(&text, "agreement.validity.n"), 40.0);
    assert!(key_value(&text, "agreement.validity.percent") < 1.0);

    ws.run(&["agree", "--labels", s(&ws.facts), s(&ws.facts), "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(key_value(&text, "agreement.main_category.percent"), 1.0);
    assert_eq!(key_value(&text, "agreement.main_category.kripp_alpha"), 1.0);
}

#[test]
fn embed_fetch_failure_is_a_fetch_error() {
    let ws = Workspace::new(10);
    let server = common::serve(|_, _| (400, "nope".into()));
    let out = factkit(&["embed-fetch", "--facts", s(&ws.facts), "--out", s(&ws.path("x.emb")), "--endpoint", &server.url]);
    assert_error(&out, "fetch", 10);
}

#[test]
fn embeddings_must_cover_facts() {
    let ws = Workspace::new(30);
    let more = ws.path("more.jsonl");
    let mut facts = read_facts(&ws.facts).unwrap();
    facts.push(FactRecord::new("extra", "fact 999 mc0").unwrap().with_labels(facts[0].labels.unwrap()));
    write_facts(&more, &facts).unwrap();
    let out = factkit(&[
        "--config", s(&ws.config), "train", "--facts", s(&more), "--embeddings", s(&ws.emb), "--out-dir", s(&ws.path("m")),
    ]);
    assert_error(&out, "embedding", 9);
}
