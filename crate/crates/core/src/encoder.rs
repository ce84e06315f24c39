//! Session state encoding. The `FeatureHash` kind is an offline stand-in for a
//! pre-trained text encoder; `RemoteEmbedding` calls an embedding service.

use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{Catalog, Session};
use crate::error::{Error, Result};
use crate::llm::RetryPolicy;

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    RemoteEmbedding,
    FeatureHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub d: usize,
    pub endpoint: Option<String>,
    pub model: String,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            kind: EncoderKind::FeatureHash,
            d: DEFAULT_DIM,
            endpoint: None,
            model: "bert-base-uncased".into(),
        }
    }
}

impl EncoderSpec {
    pub fn feature_hash(d: usize) -> Self {
        Self { d, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 8 {
            return Err(Error::invalid(format!("encoder dimension {} < 8", self.d)));
        }
        if self.kind == EncoderKind::RemoteEmbedding && self.endpoint.is_none() {
            return Err(Error::invalid("remote embedding encoder needs an endpoint"));
        }
        Ok(())
    }
}

/// `title | attr: value | ... ; title | ...` over the session's items in order.
pub fn session_to_text(session: &Session, catalog: &Catalog) -> Result<String> {
    let mut segments = Vec::with_capacity(session.items.len());
    for id in &session.items {
        let item = catalog.resolve(id)?;
        let mut seg = item.title.clone();
        for (k, v) in &item.attributes {
            seg.push_str(" | ");
            seg.push_str(k);
            seg.push_str(": ");
            seg.push_str(v);
        }
        segments.push(seg);
    }
    Ok(segments.join(" ; "))
}

fn gram_hash(gram: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(gram.as_bytes());
    h.finish()
}

/// Signed bucket counts of lowercase character 3-grams (before normalisation).
pub fn hashed_trigram_counts(text: &str, d: usize) -> Vec<f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut out = vec![0.0; d];
    let mut add = |gram: String| {
        let h = gram_hash(&gram);
        let bucket = (h % d as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        out[bucket] += sign;
    };
    if chars.len() < 3 {
        add(chars.iter().collect());
    } else {
        for w in chars.windows(3) {
            add(w.iter().collect());
        }
    }
    out
}

fn l2_normalize(mut values: Vec<f64>) -> Result<StateVector> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateText);
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(StateVector { values })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbeddingReply {
    Flat { embedding: Vec<f64> },
    OpenAi { data: Vec<EmbeddingDatum> },
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

fn remote_embedding(text: &str, spec: &EncoderSpec, retry: &RetryPolicy) -> Result<Vec<f64>> {
    let endpoint = spec.endpoint.as_deref().ok_or_else(|| Error::invalid("missing endpoint"))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .http_status_as_error(false)
        .build()
        .into();
    let body = json!({ "input": text, "model": spec.model });
    let mut attempt = 0;
    loop {
        let outcome = agent.post(endpoint).send_json(&body);
        let (status, transient, message) = match outcome {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                if (200..300).contains(&status) {
                    let reply: EmbeddingReply = serde_json::from_str(&text)?;
                    return Ok(match reply {
                        EmbeddingReply::Flat { embedding } => embedding,
                        EmbeddingReply::OpenAi { data } => data
                            .into_iter()
                            .next()
                            .map(|d| d.embedding)
                            .ok_or_else(|| Error::invalid("embedding reply had no data"))?,
                    });
                }
                (Some(status), status == 429 || status >= 500, text)
            }
            Err(e) => (None, true, e.to_string()),
        };
        if transient && attempt < retry.max_retries {
            std::thread::sleep(retry.delay(attempt));
            attempt += 1;
            continue;
        }
        return Err(Error::Backend { status, message });
    }
}

/// Encode text into a unit-norm state vector. Pure in `(text, spec)`.
pub fn encode_state(text: &str, spec: &EncoderSpec) -> Result<StateVector> {
    encode_state_with_retry(text, spec, &RetryPolicy::default())
}

pub fn encode_state_with_retry(text: &str, spec: &EncoderSpec, retry: &RetryPolicy) -> Result<StateVector> {
    spec.validate()?;
    if text.is_empty() {
        return Err(Error::invalid("cannot encode empty text"));
    }
    let raw = match spec.kind {
        EncoderKind::FeatureHash => hashed_trigram_counts(text, spec.d),
        EncoderKind::RemoteEmbedding => {
            let v = remote_embedding(text, spec, retry)?;
            if v.len() != spec.d {
                return Err(Error::DimensionMismatch { expected: spec.d, got: v.len() });
            }
            v
        }
    };
    l2_normalize(raw)
}

pub fn encode_session(session: &Session, catalog: &Catalog, spec: &EncoderSpec) -> Result<StateVector> {
    encode_state(&session_to_text(session, catalog)?, spec)
}
