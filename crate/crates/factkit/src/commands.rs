//! Subcommand implementations. Each writes its artifacts and then a run
//! manifest next to them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use factkit_core::agreement::{agreement_report, RatingsTable};
use factkit_core::baseline::fit_baseline;
use factkit_core::distribution::{aggregate_distribution, leakage_audit, predict_corpus};
use factkit_core::kmeans::{cluster_sample, kmeans_fit};
use factkit_core::metrics::{aggregate_seeds, evaluate, MetricsReport};
use factkit_core::model::{self, predict, taxonomy_categories, ModelError, TrainOutcome};
use factkit_core::split::{dedup_exact, stratified_split, SplitAssignment, SplitSpec};
use factkit_core::taxonomy::{canonicalize, Dimension, LabelSet};
use factkit_core::{EmbeddingMatrix, FactRecord, MultiHeadModel, TargetVector};

use crate::cli::{AgreeArgs, AnalyzeArgs, CanonArgs, EmbedFetchArgs, EvalArgs, PredictArgs, SampleArgs, SplitArgs, TrainArgs};
use crate::config::{ConfigError, RunConfig};
use crate::embfile::{load_embeddings, load_embeddings_with_dim, write_embeddings};
use crate::error::{Error, Result};
use crate::facts::{
    format_predictions, read_facts, read_predictions, read_raw, write_facts, write_text, DataError, PredictedFact,
};
use crate::manifest::{manifest_path_for, Manifest};
use crate::report::{format_agreement, format_distribution, format_metrics};
use crate::splitfile::{read_split, write_split};
use crate::checkpoint;

fn manifest(command: &str, config: &RunConfig, seeds: Vec<u64>) -> Manifest {
    Manifest::new(command, config.digest(), seeds)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| DataError::io(path, e).into())
}

/// Facts that take part in supervised training and evaluation.
fn usable(facts: Vec<FactRecord>) -> Vec<FactRecord> {
    facts.into_iter().filter(|f| !f.excluded).collect()
}

fn labels_of(fact: &FactRecord) -> Result<LabelSet> {
    fact.labels
        .ok_or_else(|| Error::Alignment(format!("fact {:?} has no labels", fact.id)))
}

pub fn canon(config: &RunConfig, a: &CanonArgs) -> Result<()> {
    let records = read_raw(&a.input)?;
    let mut facts = Vec::with_capacity(records.len());
    let mut log = String::new();
    for r in records {
        let result = canonicalize(&r.annotation).map_err(|source| Error::Canon {
            line: r.line,
            id: r.fact.id.clone(),
            source,
        })?;
        let mut fact = r.fact.with_labels(result.labels);
        fact.excluded = result.excluded;
        if let Some(reason) = result.exclusion_reason {
            let _ = writeln!(log, "{}\t{reason}", fact.id);
        }
        facts.push(fact);
    }
    write_facts(&a.out, &facts)?;
    let log_path = a.exclusions.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".exclusions.tsv");
        a.out.with_file_name(name)
    });
    write_text(&log_path, &log)?;

    let mut m = manifest("canon", config, vec![]);
    m.input(&a.input)?;
    m.output(&a.out)?;
    m.output(&log_path)?;
    m.note("facts", facts.len());
    m.note("excluded", facts.iter().filter(|f| f.excluded).count());
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn sample(mut config: RunConfig, a: &SampleArgs) -> Result<()> {
    if let Some(k) = a.k {
        config.sampling.k = k;
    }
    if let Some(cap) = a.cap {
        config.sampling.cap = cap;
    }
    if let Some(seed) = a.seed {
        config.sampling.seed = seed;
    }
    config.validate()?;
    let s = &config.sampling;
    let facts = read_facts(&a.facts)?;
    let unique = dedup_exact(&facts);
    let ids: Vec<&str> = unique.iter().map(|f| f.id.as_str()).collect();
    let embeddings = load_embeddings(&a.embeddings)?.select(&ids)?.l2_normalize()?;
    let clusters = kmeans_fit(&embeddings, s.k, s.seed, s.max_iter, s.tol)?;
    let sampled = cluster_sample(&unique, &clusters, s.cap, s.seed)?;
    write_facts(&a.out, &sampled)?;

    let mut m = manifest("sample", &config, vec![s.seed]);
    m.input(&a.facts)?;
    m.input(&a.embeddings)?;
    m.output(&a.out)?;
    m.note("input_facts", facts.len());
    m.note("after_dedup", unique.len());
    m.note("sampled", sampled.len());
    m.note("kmeans_iterations", clusters.iterations);
    m.note("kmeans_converged", clusters.converged);
    m.note("kmeans_inertia", clusters.inertia);
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn split(mut config: RunConfig, a: &SplitArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        config.split.seed = seed;
    }
    config.validate()?;
    let spec = config.split_spec(config.split.seed);
    let facts = usable(read_facts(&a.facts)?);
    let assignment = stratified_split(&facts, &spec)?;
    write_split(&a.out, &spec, &assignment)?;

    let mut m = manifest("split", &config, vec![spec.seed]);
    m.input(&a.facts)?;
    m.output(&a.out)?;
    m.note("train", assignment.train.len());
    m.note("val", assignment.val.len());
    m.note("test", assignment.test.len());
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn embed_fetch(mut config: RunConfig, a: &EmbedFetchArgs) -> Result<()> {
    if let Some(endpoint) = &a.endpoint {
        config.embedding.endpoint = Some(endpoint.clone());
    }
    if let Some(b) = a.batch_size {
        config.embedding.batch_size = b;
    }
    config.validate()?;
    let endpoint = config
        .embedding
        .endpoint
        .clone()
        .ok_or_else(|| ConfigError::Invalid("no embedding endpoint: pass --endpoint or set embedding.endpoint".into()))?;
    let provider = config.http_provider(&endpoint);
    let facts = read_facts(&a.facts)?;
    let texts: Vec<&str> = facts.iter().map(|f| f.text.as_str()).collect();
    let ids = facts.iter().map(|f| f.id.clone()).collect();
    let matrix = provider.fetch(&texts, ids)?;
    write_embeddings(&a.out, &matrix)?;

    let mut m = manifest("embed-fetch", &config, vec![]);
    m.input(&a.facts)?;
    m.output(&a.out)?;
    m.note("provider", provider.url());
    m.note("dim", matrix.dim());
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

fn apply_train_overrides(config: &mut RunConfig, a: &TrainArgs) -> Result<()> {
    if let Some(seeds) = &a.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(e) = a.epochs {
        config.train.max_epochs = e;
    }
    if let Some(lr) = a.lr {
        config.train.learning_rate = lr;
    }
    config.validate()?;
    Ok(())
}

/// The split for one seed: the fixed split when given, else a fresh
/// stratified split seeded with `seed`.
fn seed_split(
    config: &RunConfig,
    facts: &[FactRecord],
    fixed: Option<&(SplitSpec, SplitAssignment)>,
    seed: u64,
) -> Result<(SplitSpec, SplitAssignment)> {
    match fixed {
        Some(s) => Ok(s.clone()),
        None => {
            let spec = config.split_spec(seed);
            Ok((spec, stratified_split(facts, &spec)?))
        }
    }
}

fn gold_for(ids: &[String], by_id: &BTreeMap<&str, LabelSet>) -> Result<Vec<LabelSet>> {
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Alignment(format!("no usable labelled fact with id {id:?}")))
        })
        .collect()
}

fn history_tsv(outcome: &TrainOutcome) -> String {
    let mut out = String::from("epoch\tbatch_loss\ttrain_loss\tval_macro_f1\n");
    for e in &outcome.history {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", e.epoch, e.batch_loss, e.train_loss, e.val_macro_f1);
    }
    let _ = writeln!(out, "# best_epoch={} stopped_early={}", outcome.best_epoch, outcome.stopped_early);
    out
}

pub fn train(mut config: RunConfig, a: &TrainArgs) -> Result<()> {
    apply_train_overrides(&mut config, a)?;
    let emb_path = a
        .embeddings
        .as_ref()
        .ok_or_else(|| Error::Usage("train needs --embeddings".into()))?;
    let facts = usable(read_facts(&a.facts)?);
    let by_id: BTreeMap<&str, LabelSet> = facts
        .iter()
        .map(|f| Ok((f.id.as_str(), labels_of(f)?)))
        .collect::<Result<_>>()?;
    let ids: Vec<&str> = facts.iter().map(|f| f.id.as_str()).collect();
    let embeddings = load_embeddings(emb_path)?.select(&ids)?;
    let targets: Vec<TargetVector> = ids.iter().map(|id| TargetVector::from_labels(&by_id[id].indices())).collect();
    let fixed = a.split.as_deref().map(read_split).transpose()?;
    create_dir(&a.out_dir)?;

    let mut m = manifest("train", &config, config.seeds.clone());
    m.input(&a.facts)?;
    m.input(emb_path)?;
    if let Some(p) = &a.split {
        m.input(p)?;
    }
    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let (spec, assignment) = seed_split(&config, &facts, fixed.as_ref(), seed)?;
        let init = MultiHeadModel::new(
            embeddings.dim(),
            config.train.hidden,
            taxonomy_categories(),
            config.train.dropout,
            seed,
        )?;
        let outcome = model::train(&init, &embeddings, &targets, &assignment, &config.train_config(seed))?;
        let test = embeddings.select(&assignment.test)?;
        let pred: Vec<LabelSet> = predict(&outcome.model, &test)?
            .iter()
            .map(|p| p.to_labelset().expect("taxonomy model"))
            .collect();
        reports.push(evaluate(&gold_for(&assignment.test, &by_id)?, &pred)?);

        let ckpt = a.out_dir.join(format!("model-seed{seed}.ckpt"));
        checkpoint::save(&ckpt, &outcome.model)?;
        let history = a.out_dir.join(format!("history-seed{seed}.tsv"));
        write_text(&history, &history_tsv(&outcome))?;
        let split_path = a.out_dir.join(format!("split-seed{seed}.txt"));
        write_split(&split_path, &spec, &assignment)?;
        for p in [ckpt, history, split_path] {
            m.output(&p)?;
        }
    }
    let report_path = a.out_dir.join("report.txt");
    write_text(&report_path, &seed_report("multi-head (frozen encoder)", &reports)?)?;
    m.output(&report_path)?;
    m.write(&a.out_dir.join("train.manifest.json"))?;
    Ok(())
}

fn seed_report(name: &str, reports: &[MetricsReport]) -> Result<String> {
    Ok(format_metrics(name, &aggregate_seeds(reports)?))
}

pub fn baseline(mut config: RunConfig, a: &TrainArgs) -> Result<()> {
    apply_train_overrides(&mut config, a)?;
    let facts = usable(read_facts(&a.facts)?);
    let by_id: BTreeMap<&str, LabelSet> = facts
        .iter()
        .map(|f| Ok((f.id.as_str(), labels_of(f)?)))
        .collect::<Result<_>>()?;
    let texts: BTreeMap<&str, &str> = facts.iter().map(|f| (f.id.as_str(), f.text.as_str())).collect();
    let fixed = a.split.as_deref().map(read_split).transpose()?;
    create_dir(&a.out_dir)?;

    let mut m = manifest("baseline", &config, config.seeds.clone());
    m.input(&a.facts)?;
    if let Some(p) = &a.split {
        m.input(p)?;
    }
    let text_of = |ids: &[String]| -> Result<Vec<&str>> {
        ids.iter()
            .map(|id| {
                texts
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Alignment(format!("split id {id:?} is not a usable fact")))
            })
            .collect()
    };
    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let (spec, assignment) = seed_split(&config, &facts, fixed.as_ref(), seed)?;
        let model = fit_baseline(
            &text_of(&assignment.train)?,
            &gold_for(&assignment.train, &by_id)?,
            &config.tfidf_config(),
            &config.logreg_config(seed),
        )?;
        let pred = model.predict(&text_of(&assignment.test)?)?;
        reports.push(evaluate(&gold_for(&assignment.test, &by_id)?, &pred)?);
        let split_path = a.out_dir.join(format!("split-seed{seed}.txt"));
        write_split(&split_path, &spec, &assignment)?;
        m.output(&split_path)?;
    }
    let report_path = a.out_dir.join("baseline-report.txt");
    write_text(&report_path, &seed_report("TF-IDF + logistic regression", &reports)?)?;
    m.output(&report_path)?;
    m.write(&a.out_dir.join("baseline.manifest.json"))?;
    Ok(())
}

fn taxonomy_checkpoint(path: &Path) -> Result<MultiHeadModel> {
    let model = checkpoint::load(path)?;
    if !model.is_taxonomy() {
        return Err(ModelError::InvalidConfig("checkpoint does not carry the seven-dimension label space").into());
    }
    Ok(model)
}

pub fn predict_cmd(config: &RunConfig, a: &PredictArgs) -> Result<()> {
    let model = taxonomy_checkpoint(&a.model)?;
    let mut embeddings = load_embeddings_with_dim(&a.embeddings, model.dim)?;
    if let Some(path) = &a.facts {
        let facts = read_facts(path)?;
        let ids: Vec<&str> = facts.iter().map(|f| f.id.as_str()).collect();
        embeddings = embeddings.select(&ids)?;
    }
    let predicted: Vec<PredictedFact> = predict(&model, &embeddings)?
        .iter()
        .zip(embeddings.ids())
        .map(|(p, id)| PredictedFact::from_prediction(id.clone(), p).expect("taxonomy model"))
        .collect();
    write_text(&a.out, &format_predictions(&predicted))?;

    let mut m = manifest("predict", config, vec![]);
    m.input(&a.model)?;
    m.input(&a.embeddings)?;
    if let Some(p) = &a.facts {
        m.input(p)?;
    }
    m.output(&a.out)?;
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn eval(config: &RunConfig, a: &EvalArgs) -> Result<()> {
    let facts = usable(read_facts(&a.facts)?);
    let by_id: BTreeMap<&str, LabelSet> = facts
        .iter()
        .filter_map(|f| f.labels.map(|l| (f.id.as_str(), l)))
        .collect();
    let restrict = a.split.as_deref().map(read_split).transpose()?.map(|(_, s)| s.test);

    let mut m = manifest("eval", config, vec![]);
    m.input(&a.facts)?;
    if let Some(p) = &a.split {
        m.input(p)?;
    }
    let mut reports = Vec::new();
    for path in &a.predictions {
        let predicted = read_predictions(path)?;
        let pred_by_id: BTreeMap<&str, LabelSet> = predicted.iter().map(|p| (p.id.as_str(), p.labels)).collect();
        let ids: Vec<String> = match &restrict {
            Some(test) => test.clone(),
            None => predicted.iter().map(|p| p.id.clone()).collect(),
        };
        let gold = gold_for(&ids, &by_id)?;
        let pred: Vec<LabelSet> = ids
            .iter()
            .map(|id| {
                pred_by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Alignment(format!("{}: no prediction for {id:?}", path.display())))
            })
            .collect::<Result<_>>()?;
        reports.push(evaluate(&gold, &pred)?);
        m.input(path)?;
    }
    write_text(&a.out, &seed_report("evaluated", &reports)?)?;
    m.output(&a.out)?;
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn agree(config: &RunConfig, a: &AgreeArgs) -> Result<()> {
    if a.labels.len() < 2 {
        return Err(Error::Usage("agree needs at least two label files".into()));
    }
    let files: Vec<Vec<FactRecord>> = a.labels.iter().map(|p| read_facts(p)).collect::<std::result::Result<_, _>>()?;
    let maps: Vec<BTreeMap<&str, LabelSet>> = files
        .iter()
        .map(|facts| facts.iter().filter_map(|f| f.labels.map(|l| (f.id.as_str(), l))).collect())
        .collect();
    let mut seen = BTreeSet::new();
    let mut order: Vec<&str> = Vec::new();
    for facts in &files {
        for f in facts {
            if f.labels.is_some() && seen.insert(f.id.as_str()) {
                order.push(f.id.as_str());
            }
        }
    }
    let mut rows = Vec::new();
    for d in Dimension::ALL {
        let units: Vec<Vec<Option<usize>>> = order
            .iter()
            .map(|id| maps.iter().map(|m| m.get(id).map(|l| l.index(d))).collect())
            .collect();
        rows.push((d, agreement_report(&RatingsTable::new(units)?)?));
    }
    write_text(&a.out, &format_agreement(&rows, a.labels.len()))?;

    let mut m = manifest("agree", config, vec![]);
    for p in &a.labels {
        m.input(p)?;
    }
    m.output(&a.out)?;
    m.note("units", order.len());
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}

pub fn analyze(config: &RunConfig, a: &AnalyzeArgs) -> Result<()> {
    let models: Vec<MultiHeadModel> = a.models.iter().map(|p| checkpoint::load(p)).collect::<std::result::Result<_, _>>()?;
    let corpus = read_facts(&a.corpus)?;
    let ids: Vec<&str> = corpus.iter().map(|f| f.id.as_str()).collect();
    let embeddings: EmbeddingMatrix = load_embeddings(&a.embeddings)?.select(&ids)?;
    let tables = predict_corpus(&models, &embeddings)?;
    let categories = &models[0].categories;
    let name = a
        .corpus
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    let text = match &a.train_facts {
        Some(path) => {
            let train = read_facts(path)?;
            let audit = leakage_audit(&train, &corpus, categories, &tables)?;
            format_distribution(&name, &audit.full, Some(&audit))
        }
        None => format_distribution(&name, &aggregate_distribution(categories, &tables)?, None),
    };
    write_text(&a.out, &text)?;

    let mut m = manifest("analyze", config, vec![]);
    for p in a.models.iter().chain([&a.corpus, &a.embeddings]).chain(&a.train_facts) {
        m.input(p)?;
    }
    m.output(&a.out)?;
    m.write(&manifest_path_for(&a.out))?;
    Ok(())
}
