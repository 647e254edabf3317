//! Line-delimited JSON files of facts, raw annotations and predictions.
//!
//! A facts line looks like
//!
//! ```json
//! {"id":"f1","text":"I love hiking.","source":"MSC","labels":{"main_category":"Preferences","time":"Present","referent":"Self","duration":"Long-term","validity":"Valid","invalidity_reason":"None","followup":"None"}}
//! ```
//!
//! `context` and `labels` are optional; `excluded` is written only when set.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use factkit_core::model::Prediction;
use factkit_core::taxonomy::{Dimension, LabelSet, RawAnnotation, Source};
use factkit_core::FactRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(line: usize, message: impl ToString) -> Self {
        DataError::Parse {
            line,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsLine {
    pub main_category: String,
    pub time: String,
    pub referent: String,
    pub duration: String,
    pub validity: String,
    pub invalidity_reason: String,
    pub followup: String,
}

impl LabelsLine {
    pub fn from_labels(labels: &LabelSet) -> Self {
        let l = |d| labels.label(d).to_string();
        LabelsLine {
            main_category: l(Dimension::MainCategory),
            time: l(Dimension::Time),
            referent: l(Dimension::Referent),
            duration: l(Dimension::Duration),
            validity: l(Dimension::Validity),
            invalidity_reason: l(Dimension::InvalidityReason),
            followup: l(Dimension::Followup),
        }
    }

    pub fn to_labels(&self) -> Result<LabelSet, String> {
        let mut labels = LabelSet::from_indices(&[0; Dimension::COUNT]).expect("index 0 exists in every dimension");
        let values = [
            &self.main_category,
            &self.time,
            &self.referent,
            &self.duration,
            &self.validity,
            &self.invalidity_reason,
            &self.followup,
        ];
        for (dimension, value) in Dimension::ALL.into_iter().zip(values) {
            labels.set(dimension, value).map_err(|e| e.to_string())?;
        }
        Ok(labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactLine {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<LabelsLine>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    excluded: bool,
}

fn read_lines(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn numbered(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_facts(content: &str) -> Result<Vec<FactRecord>, DataError> {
    let mut seen = BTreeSet::new();
    let mut facts = Vec::new();
    for (line, raw) in numbered(content) {
        let parsed: FactLine = serde_json::from_str(raw).map_err(|e| DataError::parse(line, e))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(DataError::DuplicateId { line, id: parsed.id });
        }
        let mut fact = FactRecord::new(parsed.id, parsed.text).map_err(|e| DataError::parse(line, e))?;
        fact.context = parsed.context;
        fact.source = match parsed.source.as_deref() {
            None => Source::Other,
            Some(s) => Source::parse(s).ok_or_else(|| DataError::parse(line, format!("unknown source {s:?}")))?,
        };
        if let Some(labels) = parsed.labels {
            fact.labels = Some(labels.to_labels().map_err(|e| DataError::parse(line, e))?);
        }
        fact.excluded = parsed.excluded;
        facts.push(fact);
    }
    Ok(facts)
}

pub fn read_facts(path: &Path) -> Result<Vec<FactRecord>, DataError> {
    parse_facts(&read_lines(path)?)
}

pub fn format_facts(facts: &[FactRecord]) -> String {
    let mut out = String::new();
    for fact in facts {
        let line = FactLine {
            id: fact.id.clone(),
            text: fact.text.clone(),
            context: fact.context.clone(),
            source: Some(fact.source.as_str().to_string()),
            labels: fact.labels.as_ref().map(LabelsLine::from_labels),
            excluded: fact.excluded,
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn write_facts(path: &Path, facts: &[FactRecord]) -> Result<(), DataError> {
    write_text(path, &format_facts(facts))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    let mut file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| DataError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotationLine {
    categories: Vec<String>,
    main_category: String,
    time: String,
    referent: String,
    specificity: String,
    duration: Vec<String>,
    context_sufficient: String,
    broken: String,
    broken_reason: String,
    followup: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    annotation: RawAnnotationLine,
}

/// A fact paired with its annotator output, as read from a raw file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub line: usize,
    pub fact: FactRecord,
    pub annotation: RawAnnotation,
}

/// Reads raw-annotation lines: the fact fields plus an `annotation` object
/// carrying every prompt key.
pub fn parse_raw(content: &str) -> Result<Vec<RawRecord>, DataError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, raw) in numbered(content) {
        let parsed: RawLine = serde_json::from_str(raw).map_err(|e| DataError::parse(line, e))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(DataError::DuplicateId { line, id: parsed.id });
        }
        let mut fact = FactRecord::new(parsed.id, parsed.text).map_err(|e| DataError::parse(line, e))?;
        fact.context = parsed.context;
        fact.source = match parsed.source.as_deref() {
            None => Source::Other,
            Some(s) => Source::parse(s).ok_or_else(|| DataError::parse(line, format!("unknown source {s:?}")))?,
        };
        let a = parsed.annotation;
        out.push(RawRecord {
            line,
            fact,
            annotation: RawAnnotation {
                categories: a.categories,
                main_category: a.main_category,
                time: a.time,
                referent: a.referent,
                specificity: a.specificity,
                duration: a.duration,
                context_sufficient: a.context_sufficient,
                broken: a.broken,
                broken_reason: a.broken_reason,
                followup: a.followup,
            },
        });
    }
    Ok(out)
}

pub fn read_raw(path: &Path) -> Result<Vec<RawRecord>, DataError> {
    parse_raw(&read_lines(path)?)
}

pub fn format_raw(records: &[(FactRecord, RawAnnotation)]) -> String {
    let mut out = String::new();
    for (fact, a) in records {
        let line = RawLine {
            id: fact.id.clone(),
            text: fact.text.clone(),
            context: fact.context.clone(),
            source: Some(fact.source.as_str().to_string()),
            annotation: RawAnnotationLine {
                categories: a.categories.clone(),
                main_category: a.main_category.clone(),
                time: a.time.clone(),
                referent: a.referent.clone(),
                specificity: a.specificity.clone(),
                duration: a.duration.clone(),
                context_sufficient: a.context_sufficient.clone(),
                broken: a.broken.clone(),
                broken_reason: a.broken_reason.clone(),
                followup: a.followup.clone(),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfidenceLine {
    main_category: f64,
    time: f64,
    referent: f64,
    duration: f64,
    validity: f64,
    invalidity_reason: f64,
    followup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    id: String,
    labels: LabelsLine,
    confidence: ConfidenceLine,
}

/// One fact's predicted labels and per-dimension confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedFact {
    pub id: String,
    pub labels: LabelSet,
    pub confidence: [f64; Dimension::COUNT],
}

impl PredictedFact {
    pub fn from_prediction(id: impl Into<String>, p: &Prediction) -> Option<Self> {
        let confidence: [f64; Dimension::COUNT] = p.confidences.as_slice().try_into().ok()?;
        Some(PredictedFact {
            id: id.into(),
            labels: p.to_labelset()?,
            confidence,
        })
    }
}

pub fn format_predictions(predictions: &[PredictedFact]) -> String {
    let mut out = String::new();
    for p in predictions {
        let c = &p.confidence;
        let line = PredictionLine {
            id: p.id.clone(),
            labels: LabelsLine::from_labels(&p.labels),
            confidence: ConfidenceLine {
                main_category: c[0],
                time: c[1],
                referent: c[2],
                duration: c[3],
                validity: c[4],
                invalidity_reason: c[5],
                followup: c[6],
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("finite confidences serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_predictions(content: &str) -> Result<Vec<PredictedFact>, DataError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, raw) in numbered(content) {
        let parsed: PredictionLine = serde_json::from_str(raw).map_err(|e| DataError::parse(line, e))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(DataError::DuplicateId { line, id: parsed.id });
        }
        let c = parsed.confidence;
        out.push(PredictedFact {
            id: parsed.id,
            labels: parsed.labels.to_labels().map_err(|e| DataError::parse(line, e))?,
            confidence: [
                c.main_category,
                c.time,
                c.referent,
                c.duration,
                c.validity,
                c.invalidity_reason,
                c.followup,
            ],
        });
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictedFact>, DataError> {
    parse_predictions(&read_lines(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use factkit_core::taxonomy::{InvalidityReason, MainCategory};

    #[test]
    fn reads_three_lines_in_order() {
        let text = "{\"id\":\"a\",\"text\":\"x\"}\n\n{\"id\":\"b\",\"text\":\"y\"}\n{\"id\":\"c\",\"text\":\"z\"}\n";
        let facts = parse_facts(text).unwrap();
        let ids: Vec<&str> = facts.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn unknown_label_reports_line() {
        let text = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\",\"labels\":{\"main_category\":\"Hobbies\",\"time\":\"None\",\"referent\":\"None\",\"duration\":\"None\",\"validity\":\"Valid\",\"invalidity_reason\":\"None\",\"followup\":\"None\"}}\n";
        match parse_facts(text) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_id() {
        let text = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        assert!(matches!(parse_facts(text), Err(DataError::DuplicateId { line: 2, .. })));
    }

    #[test]
    fn round_trip() {
        let mut labels = LabelSet::invalid(InvalidityReason::ContextInsufficient);
        let a = FactRecord::new("a", "I have two dogs").unwrap().with_labels(labels);
        labels = LabelSet::from_indices(&[0, 1, 0, 1, 0, 5, 2]).unwrap();
        labels.main_category = MainCategory::Possessions;
        let mut b = FactRecord::new("b", "\"quoted\" ünïcode").unwrap().with_labels(labels).with_context("ctx");
        b.excluded = true;
        let facts = vec![a, b];
        assert_eq!(parse_facts(&format_facts(&facts)).unwrap(), facts);
    }
}
