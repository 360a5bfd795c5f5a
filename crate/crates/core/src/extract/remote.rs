//! HTTP adapter for an externally served NER model.
//!
//! Wire contract: `POST {"text": ...}` answered by
//! `{"entities": [{"start": int, "end": int, "type": "SYMPTOM"}]}` with char
//! offsets into the request text. Entities of other types are ignored.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ExtractError, Extractor, Span};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Upper bound on concurrent requests when used with
    /// [`super::extract_all`].
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            max_in_flight: 8,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct Response {
    entities: Vec<WireEntity>,
}

#[derive(Deserialize)]
struct WireEntity {
    start: i64,
    end: i64,
    #[serde(rename = "type")]
    kind: String,
}

pub struct RemoteExtractor {
    agent: ureq::Agent,
    config: RemoteConfig,
}

impl RemoteExtractor {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Self { agent, config }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl Extractor for RemoteExtractor {
    fn spans(&self, tweet_id: &str, text: &str) -> Result<Vec<Span>, ExtractError> {
        let unavailable = |message: String| ExtractError::Unavailable {
            tweet_id: tweet_id.to_string(),
            message,
        };
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .send_json(&Request { text })
            .map_err(|e| unavailable(e.to_string()))?;
        let body: Response = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Json(_) => ExtractError::InvalidResponse {
                tweet_id: tweet_id.to_string(),
                message: e.to_string(),
            },
            other => unavailable(other.to_string()),
        })?;
        body.entities
            .into_iter()
            .filter(|e| e.kind == "SYMPTOM")
            .map(|e| {
                if e.start < 0 || e.end < 0 {
                    return Err(ExtractError::InvalidResponse {
                        tweet_id: tweet_id.to_string(),
                        message: format!("negative offset in span [{}, {})", e.start, e.end),
                    });
                }
                Ok(Span {
                    start: e.start as usize,
                    end: e.end as usize,
                })
            })
            .collect()
    }
}
