//! Shared fixtures: a mock embedding service and a synthetic fact corpus
//! whose embeddings make every dimension linearly separable.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use factkit_core::rng::XorShift64Star;
use factkit_core::taxonomy::{Dimension, FactRecord, InvalidityReason, LabelSet, Source};
use factkit_core::EmbeddingMatrix;

/// One request as the mock server saw it.
#[derive(Debug, Clone)]
pub struct Seen {
    pub texts: Vec<String>,
    pub authorization: Option<String>,
}

pub struct MockServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

type Handler = dyn Fn(usize, &[String]) -> (u16, String) + Send + Sync;

/// Serves `POST /embed` on an ephemeral port. The handler gets the
/// zero-based request number and the texts, and returns status and body.
pub fn serve<F>(handler: F) -> MockServer
where
    F: Fn(usize, &[String]) -> (u16, String) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen: Arc<Mutex<Vec<Seen>>> = Arc::default();
    let handler: Arc<Handler> = Arc::new(handler);
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            let log = Arc::clone(&log);
            thread::spawn(move || {
                let _ = handle(stream, &*handler, &log);
            });
        }
    });
    MockServer { url, seen }
}

fn handle(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Seen>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut authorization = None;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        reader.read_line(&mut line)?;
        let header = line.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let texts: Vec<String> = request["texts"]
        .as_array()
        .map(|a| a.iter().map(|t| t.as_str().unwrap_or_default().to_string()).collect())
        .unwrap_or_default();
    let number = {
        let mut log = log.lock().unwrap();
        log.push(Seen {
            texts: texts.clone(),
            authorization,
        });
        log.len() - 1
    };
    let (status, body) = handler(number, &texts);
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

/// Body of a successful embedding response.
pub fn embedding_body(rows: &[Vec<f64>]) -> String {
    let dim = rows.first().map_or(0, Vec::len);
    serde_json::json!({ "dim": dim, "embeddings": rows }).to_string()
}

/// Each text embeds as its UTF-8 byte length.
pub fn byte_length_server() -> MockServer {
    serve(|_, texts| {
        let rows: Vec<Vec<f64>> = texts.iter().map(|t| vec![t.len() as f64]).collect();
        (200, embedding_body(&rows))
    })
}

/// Embeds synthetic fact texts through `synthetic_vector`.
pub fn synthetic_server() -> MockServer {
    serve(|_, texts| {
        let rows: Vec<Vec<f64>> = texts.iter().map(|t| synthetic_vector(t)).collect();
        (200, embedding_body(&rows))
    })
}

const TAGS: [&str; Dimension::COUNT] = ["mc", "tm", "rf", "du", "va", "ir", "fu"];

/// Width of a synthetic embedding: one slot per label of every dimension.
pub fn synthetic_dim() -> usize {
    Dimension::ALL.iter().map(|d| d.label_count()).sum()
}

/// A label set cycling through the taxonomy so every label occurs.
pub fn synthetic_labels(i: usize) -> LabelSet {
    if i % 6 == 5 {
        let reasons = [
            InvalidityReason::NoFact,
            InvalidityReason::Opinion,
            InvalidityReason::ContextInsufficient,
            InvalidityReason::Unattributable,
            InvalidityReason::MultipleFacts,
        ];
        return LabelSet::invalid(reasons[(i / 6) % reasons.len()]);
    }
    let v = i - i / 6;
    let time = (v / 8) % 3;
    let followup = if time == 2 { (v / 3) % 3 } else { 2 };
    LabelSet::from_indices(&[v % 8, time, (v / 2) % 2, (v / 5) % 3, 0, 5, followup]).expect("indices in range")
}

/// Text carrying the labels as tokens, e.g. `fact 7 mc3 tm0 ...`.
pub fn synthetic_text(i: usize, labels: &LabelSet) -> String {
    let mut text = format!("fact {i}");
    for (tag, index) in TAGS.iter().zip(labels.indices()) {
        text.push_str(&format!(" {tag}{index}"));
    }
    text
}

/// One-hot block per dimension plus small noise derived from the text.
pub fn synthetic_vector(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; synthetic_dim()];
    let mut offset = 0;
    for (d, tag) in Dimension::ALL.iter().zip(TAGS) {
        let index = text
            .split_whitespace()
            .find_map(|w| w.strip_prefix(tag).and_then(|n| n.parse::<usize>().ok()))
            .unwrap_or(0);
        v[offset + index] = 1.0;
        offset += d.label_count();
    }
    let mut seed = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        seed = (seed ^ b as u64).wrapping_mul(0x100_0000_01b3);
    }
    let mut rng = XorShift64Star::new(seed);
    for x in &mut v {
        *x += rng.symmetric(0.05);
    }
    v
}

pub fn synthetic_facts(n: usize) -> Vec<FactRecord> {
    (0..n)
        .map(|i| {
            let labels = synthetic_labels(i);
            let source = if i % 2 == 0 { Source::PersonaChat } else { Source::Msc };
            FactRecord::new(format!("f{i:04}"), synthetic_text(i, &labels))
                .unwrap()
                .with_labels(labels)
                .with_source(source)
        })
        .collect()
}

pub fn synthetic_embeddings(facts: &[FactRecord]) -> EmbeddingMatrix {
    let rows: Vec<Vec<f64>> = facts.iter().map(|f| synthetic_vector(&f.text)).collect();
    EmbeddingMatrix::from_rows(&rows, facts.iter().map(|f| f.id.clone()).collect()).unwrap()
}
