//! Shared blocking JSON-over-HTTP client used by the remote tagger and the
//! remote summarizer backend.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("{url} unreachable: {message}")]
    Unreachable { url: String, message: String },
    #[error("{url} answered HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("{url} sent an undecodable response: {message}")]
    Decode { url: String, message: String },
}

/// Timeout and retry policy, read from the run configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub timeout_secs: f64,
    /// Extra attempts after the first one; only connection failures and
    /// 5xx answers are retried.
    pub retries: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig { timeout_secs: 60.0, retries: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    client: Client,
    config: RemoteConfig,
}

impl JsonClient {
    pub fn new(config: RemoteConfig) -> Self {
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
            .build()
            .expect("http client builds");
        JsonClient { client, config }
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, url: &str, body: &Req) -> Result<Resp, RemoteError> {
        let mut attempt = 0;
        loop {
            match self.post_once(url, body) {
                Err(e @ (RemoteError::Unreachable { .. } | RemoteError::Status { status: 500.., .. }))
                    if attempt < self.config.retries =>
                {
                    attempt += 1;
                    log::warn!("retrying {url} (attempt {attempt}) after: {e}");
                    thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(&self, url: &str, body: &Req) -> Result<Resp, RemoteError> {
        let resp = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| RemoteError::Unreachable { url: url.to_string(), message: e.to_string() })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(RemoteError::Status { url: url.to_string(), status: status.as_u16() });
        }
        let bytes = resp
            .bytes()
            .map_err(|e| RemoteError::Unreachable { url: url.to_string(), message: e.to_string() })?;
        serde_json::from_slice(&bytes).map_err(|e| RemoteError::Decode { url: url.to_string(), message: e.to_string() })
    }
}

/// Joins a base URL and a route without doubling slashes.
pub fn endpoint(base: &str, route: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), route.trim_start_matches('/'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_joins() {
        assert_eq!(endpoint("http://h:1/", "/tag"), "http://h:1/tag");
        assert_eq!(endpoint("http://h:1", "summarize"), "http://h:1/summarize");
    }

    #[test]
    fn unreachable_is_reported() {
        let client = JsonClient::new(RemoteConfig { timeout_secs: 1.0, retries: 0 });
        // port 9 (discard) on localhost is essentially never listening
        let err = client.post::<_, serde_json::Value>("http://127.0.0.1:9/x", &serde_json::json!({})).unwrap_err();
        assert!(matches!(err, RemoteError::Unreachable { .. }), "{err}");
    }
}
