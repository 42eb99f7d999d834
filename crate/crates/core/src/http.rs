//! Blocking JSON-over-HTTP calls with bounded retries, shared by the
//! question-generation and embedding clients.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("service unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("service timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed service response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after the first failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    200
}

impl EndpointConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

/// A reusable client for one endpoint. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
}

enum Failure {
    Retry(ServiceError),
    Fatal(ServiceError),
}

impl JsonEndpoint {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt<B: Serialize, R: DeserializeOwned>(&self, body: &B, attempt: u32) -> Result<R, Failure> {
        let mut resp = match self.agent.post(&self.config.endpoint).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Failure::Retry(ServiceError::Timeout { attempts: attempt })),
            Err(e) => {
                return Err(Failure::Retry(ServiceError::Unavailable {
                    attempts: attempt,
                    message: e.to_string(),
                }))
            }
        };
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(Failure::Retry(ServiceError::Unavailable {
                attempts: attempt,
                message: format!("status {status}"),
            }));
        }
        if status >= 400 {
            return Err(Failure::Fatal(ServiceError::Unavailable {
                attempts: attempt,
                message: format!("status {status}"),
            }));
        }
        resp.body_mut().read_json::<R>().map_err(|e| match e {
            ureq::Error::Timeout(_) => Failure::Retry(ServiceError::Timeout { attempts: attempt }),
            other => Failure::Fatal(ServiceError::MalformedResponse(other.to_string())),
        })
    }

    /// POST `body` and decode the JSON reply, retrying transport failures and 5xx.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, ServiceError> {
        let attempts = self.config.retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            match self.attempt(body, attempt) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(e)) => {
                    log::debug!("{} attempt {attempt} failed: {e}", self.config.endpoint);
                    last = Some(e);
                    if attempt < attempts {
                        thread::sleep(Duration::from_millis(self.config.backoff_ms * u64::from(attempt)));
                    }
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
