use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{Provider, ProviderConfig, ProviderKind};
use crate::error::{AlexError, Result};
use crate::vector;

/// Overrides the configured sidecar endpoint when set.
pub const PROVIDER_URL_ENV: &str = "ALEX_PROVIDER_URL";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

const RETRIES: usize = 2;
const BACKOFF_BASE_MS: u64 = 100;
// Sidecar vectors are renormalized when within this distance of unit length.
const SIDECAR_NORM_SLACK: f64 = 1e-3;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    fact: &'a str,
    n: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    questions: Vec<String>,
}

/// Blocking HTTP client for the embedding/generation sidecar.
#[derive(Debug)]
pub struct RemoteProvider {
    base: String,
    dim: usize,
    temperature: f64,
    client: reqwest::blocking::Client,
    requests: AtomicUsize,
}

impl RemoteProvider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        let base = std::env::var(PROVIDER_URL_ENV)
            .ok()
            .or_else(|| cfg.endpoint.clone())
            .ok_or_else(|| {
                AlexError::InvalidArgument("remote provider requires an endpoint".into())
            })?;
        Self::new(&base, cfg.dim, Duration::from_millis(cfg.timeout_ms))
    }

    pub fn new(base: &str, dim: usize, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AlexError::Provider(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            dim,
            temperature: DEFAULT_TEMPERATURE,
            client,
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        route: &str,
        body: &Req,
    ) -> Result<Resp> {
        let url = format!("{}{route}", self.base);
        let mut last_err = String::new();
        for attempt in 0..=RETRIES {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1)));
            }
            self.requests.fetch_add(1, Ordering::Relaxed);
            let outcome = self
                .client
                .post(&url)
                .json(body)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<Resp>());
            match outcome {
                Ok(resp) => return Ok(resp),
                Err(e) => {
                    warn!(%url, attempt, error = %e, "provider request failed");
                    last_err = e.to_string();
                }
            }
        }
        Err(AlexError::Provider(format!(
            "{url} failed after {} attempts: {last_err}",
            RETRIES + 1
        )))
    }
}

impl Provider for RemoteProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let resp: EmbedResponse = self.post("/embed", &EmbedRequest { texts })?;
        if resp.dim != self.dim {
            return Err(AlexError::Provider(format!(
                "sidecar reports dim {}, configured {}",
                resp.dim, self.dim
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|mut v| {
                if v.len() != self.dim {
                    return Err(AlexError::Provider(format!(
                        "sidecar returned a {}-dim vector, expected {}",
                        v.len(),
                        self.dim
                    )));
                }
                if !vector::is_unit(&v, SIDECAR_NORM_SLACK) {
                    return Err(AlexError::Provider(format!(
                        "sidecar returned a non-unit vector (norm {})",
                        vector::norm(&v)
                    )));
                }
                vector::normalize(&mut v);
                Ok(v)
            })
            .collect()
    }

    fn generate_raw(&self, fact: &str, n: usize) -> Result<Vec<String>> {
        let resp: GenerateResponse = self
            .post(
                "/generate",
                &GenerateRequest {
                    fact,
                    n,
                    temperature: self.temperature,
                },
            )
            .map_err(|e| AlexError::Provider(format!("generating questions for {fact:?}: {e}")))?;
        Ok(resp.questions)
    }
}
