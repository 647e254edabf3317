//! Embedding providers: a precomputed `.emb` file or an HTTP service.
//!
//! The service protocol is `POST {endpoint}/embed` with body
//! `{"texts": [...]}`; a 200 response carries `{"dim": d, "embeddings": [[...], ...]}`
//! with one row per text in request order. If `FACTKIT_EMBED_TOKEN` is set
//! it is sent as a bearer token.

use std::thread;
use std::time::Duration;

use factkit_core::embedding::EmbeddingError;
use factkit_core::EmbeddingMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOKEN_ENV: &str = "FACTKIT_EMBED_TOKEN";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("server answered {status}: {body}")]
    ProtocolError { status: u16, body: String },
    #[error("batch {batch} returned dimension {found}, earlier batches had {expected}")]
    DimensionDrift { expected: usize, found: usize, batch: usize },
    #[error("{texts} texts but {ids} ids")]
    IdCountMismatch { texts: usize, ids: usize },
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error(transparent)]
    Invalid(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpProvider {
    pub endpoint: String,
    pub batch_size: usize,
    pub timeout: Duration,
    /// Extra attempts after a failed request.
    pub retries: u32,
    /// Sleep before retry `n` is `backoff · n`.
    pub backoff: Duration,
    pub token: Option<String>,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpProvider {
            endpoint: endpoint.into(),
            batch_size: 64,
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(250),
            token: None,
        }
    }

    /// Reads the bearer token from the environment.
    pub fn with_env_token(mut self) -> Self {
        self.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        self
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/embed") {
            base.to_string()
        } else {
            format!("{base}/embed")
        }
    }

    /// Embeds `texts` and labels the rows with `ids`.
    pub fn fetch<S: AsRef<str>>(&self, texts: &[S], ids: Vec<String>) -> Result<EmbeddingMatrix, FetchError> {
        if texts.len() != ids.len() {
            return Err(FetchError::IdCountMismatch {
                texts: texts.len(),
                ids: ids.len(),
            });
        }
        let (dim, data) = self.fetch_rows(texts)?;
        if ids.is_empty() {
            return Ok(EmbeddingMatrix::new(dim.max(1), data, ids)?);
        }
        Ok(EmbeddingMatrix::new(dim, data, ids)?)
    }

    /// Row-major values of every text, in input order, and their dimension.
    pub fn fetch_rows<S: AsRef<str>>(&self, texts: &[S]) -> Result<(usize, Vec<f32>), FetchError> {
        if self.batch_size == 0 {
            return Err(FetchError::ZeroBatch);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = self.url();
        let mut dim: Option<usize> = None;
        let mut data = Vec::new();
        for (batch_no, batch) in texts.chunks(self.batch_size).enumerate() {
            let texts: Vec<&str> = batch.iter().map(AsRef::as_ref).collect();
            let response = self.post_with_retries(&agent, &url, &texts)?;
            let expected = *dim.get_or_insert(response.dim);
            if response.dim != expected {
                return Err(FetchError::DimensionDrift {
                    expected,
                    found: response.dim,
                    batch: batch_no,
                });
            }
            data.extend(response.values);
        }
        Ok((dim.unwrap_or(0), data))
    }

    fn post_with_retries(&self, agent: &ureq::Agent, url: &str, texts: &[&str]) -> Result<Batch, FetchError> {
        let body = serde_json::to_string(&EmbedRequest { texts }).expect("strings serialize");
        let mut attempt = 0;
        loop {
            match self.post_once(agent, url, &body, texts.len()) {
                Ok(batch) => return Ok(batch),
                Err(e) if attempt < self.retries && retryable(&e) => {
                    attempt += 1;
                    thread::sleep(self.backoff * attempt);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(&self, agent: &ureq::Agent, url: &str, body: &str, expected_rows: usize) -> Result<Batch, FetchError> {
        let mut request = agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request
            .send(body)
            .map_err(|e| FetchError::TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(1 << 30)
            .read_to_string()
            .map_err(|e| FetchError::TransportError(e.to_string()))?;
        if status != 200 {
            return Err(FetchError::ProtocolError { status, body: text });
        }
        let protocol = |detail: String| FetchError::ProtocolError { status, body: detail };
        let parsed: EmbedResponse = serde_json::from_str(&text).map_err(|e| protocol(format!("malformed body: {e}")))?;
        if parsed.embeddings.len() != expected_rows {
            return Err(protocol(format!(
                "{} embeddings for {expected_rows} texts",
                parsed.embeddings.len()
            )));
        }
        let mut values = Vec::with_capacity(expected_rows * parsed.dim);
        for (i, row) in parsed.embeddings.into_iter().enumerate() {
            if row.len() != parsed.dim {
                return Err(protocol(format!("row {i} has {} values, declared dim {}", row.len(), parsed.dim)));
            }
            values.extend(row.into_iter().map(|v| v as f32));
        }
        Ok(Batch {
            dim: parsed.dim,
            values,
        })
    }
}

fn retryable(e: &FetchError) -> bool {
    match e {
        FetchError::TransportError(_) => true,
        FetchError::ProtocolError { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

struct Batch {
    dim: usize,
    values: Vec<f32>,
}
