//! HTTP clients for the model services the pipeline calls out to, each
//! with a fixture-replay mode for offline runs.
//!
//! Wire contracts:
//! - language model: `POST {endpoint}/complete` with
//!   `{"prompt": string, "max_tokens": int}` -> `{"text": string}`
//! - dense captioner: `POST {endpoint}/dense_captions` with
//!   `{"image_b64": base64 PNG}` -> `{"captions": [{"text", "box": [x1,y1,x2,y2]}]}`
//! - encoder service: `POST {endpoint}/encode` with
//!   `{"modality": "image"|"text", "payload_b64"|"text": ...}` ->
//!   `{"dim": int, "values": [float...]}`
//!
//! Fixtures are JSON response bodies stored one per file, named by the
//! hex sha256 of the request key (the prompt for the LLM, the canonical
//! image/text content hash for the captioner and encoder).

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use comclip_core::ground::DenseCaption;
use comclip_core::image::{BoxRegion, ImageBuf};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::imgio;

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const LLM_MAX_TOKENS: u32 = 512;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("no endpoint configured and no fixture matched")]
    NoEndpoint,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}")]
    Http { status: u16 },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("fixture missing: {0}")]
    FixtureMissing(PathBuf),
    #[error("fixture io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image encode error: {0}")]
    Image(String),
}

/// Where responses come from: the network, recorded files, or the network
/// with responses persisted for later replay.
#[derive(Debug, Clone, Default)]
pub enum FixtureMode {
    #[default]
    Off,
    Replay(PathBuf),
    Record(PathBuf),
}

impl FixtureMode {
    fn dir(&self) -> Option<&Path> {
        match self {
            FixtureMode::Off => None,
            FixtureMode::Replay(d) | FixtureMode::Record(d) => Some(d),
        }
    }
}

/// Counting semaphore bounding concurrent in-flight requests.
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.cv.notify_one();
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fixture_file(dir: &Path, key_hex: &str) -> PathBuf {
    dir.join(format!("{key_hex}.json"))
}

fn read_fixture(dir: &Path, key_hex: &str) -> Result<Option<String>, ClientError> {
    let path = fixture_file(dir, key_hex);
    match std::fs::read_to_string(&path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn write_fixture(dir: &Path, key_hex: &str, body: &str) -> Result<(), ClientError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(fixture_file(dir, key_hex), body)?;
    Ok(())
}

/// Shared plumbing: endpoint, auth, retry policy, fixtures, rate limit.
struct HttpService {
    endpoint: Option<String>,
    token: Option<String>,
    timeout: Duration,
    retries: u32,
    fixtures: FixtureMode,
    limiter: Semaphore,
    http: reqwest::blocking::Client,
}

impl HttpService {
    fn new(
        endpoint: Option<String>,
        token: Option<String>,
        timeout: Duration,
        retries: u32,
        max_in_flight: usize,
        fixtures: FixtureMode,
    ) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client construction");
        Self {
            endpoint,
            token,
            timeout,
            retries,
            fixtures,
            limiter: Semaphore::new(max_in_flight),
            http,
        }
    }

    /// Resolve a request: fixture hit, else live call (recording if asked).
    fn request(&self, path: &str, key_hex: &str, body: &serde_json::Value) -> Result<String, ClientError> {
        if let Some(dir) = self.fixtures.dir() {
            if let Some(hit) = read_fixture(dir, key_hex)? {
                return Ok(hit);
            }
            if matches!(self.fixtures, FixtureMode::Replay(_)) {
                return Err(ClientError::FixtureMissing(fixture_file(dir, key_hex)));
            }
        }
        let text = self.post_with_retries(path, body)?;
        if let FixtureMode::Record(dir) = &self.fixtures {
            write_fixture(dir, key_hex, &text)?;
        }
        Ok(text)
    }

    fn post_with_retries(&self, path: &str, body: &serde_json::Value) -> Result<String, ClientError> {
        let endpoint = self.endpoint.as_deref().ok_or(ClientError::NoEndpoint)?;
        let url = format!("{}{}", endpoint.trim_end_matches('/'), path);
        let _permit = self.limiter.acquire();
        let mut delay = Duration::from_millis(500);
        let mut last = ClientError::Transport("no attempt made".into());
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            let mut req = self.http.post(&url).timeout(self.timeout).json(body);
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp
                            .text()
                            .map_err(|e| ClientError::Transport(e.to_string()));
                    }
                    last = ClientError::Http {
                        status: status.as_u16(),
                    };
                    if !status.is_server_error() {
                        return Err(last); // 4xx: retrying will not help
                    }
                }
                Err(e) => last = ClientError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}

/// Something that can complete a text prompt; the LLM parser and aligner
/// depend on this rather than on a concrete client.
pub trait TextCompletion: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

impl<F> TextCompletion for F
where
    F: Fn(&str) -> Result<String, ClientError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        self(prompt)
    }
}

#[derive(Debug, Clone)]
pub struct LlmClientConfig {
    pub endpoint: Option<String>,
    pub token: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub max_in_flight: usize,
    pub fixtures: FixtureMode,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            token: None,
            timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS),
            retries: DEFAULT_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            fixtures: FixtureMode::Off,
        }
    }
}

/// Client for the `/complete` language-model service.
pub struct LlmClient {
    service: HttpService,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

impl LlmClient {
    pub fn new(cfg: LlmClientConfig) -> Self {
        Self {
            service: HttpService::new(
                cfg.endpoint,
                cfg.token,
                cfg.timeout,
                cfg.retries,
                cfg.max_in_flight,
                cfg.fixtures,
            ),
        }
    }
}

impl TextCompletion for LlmClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let key = sha256_hex(prompt.as_bytes());
        let body = serde_json::json!({ "prompt": prompt, "max_tokens": LLM_MAX_TOKENS });
        let raw = self.service.request("/complete", &key, &body)?;
        let parsed: CompleteResponse =
            serde_json::from_str(&raw).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        Ok(parsed.text)
    }
}

/// Client for the `/dense_captions` region captioning service.
pub struct CaptionerClient {
    service: HttpService,
}

#[derive(Deserialize, Serialize)]
struct WireCaption {
    text: String,
    #[serde(rename = "box")]
    coords: [i64; 4],
}

#[derive(Deserialize)]
struct CaptionsResponse {
    captions: Vec<WireCaption>,
}

impl CaptionerClient {
    pub fn new(endpoint: Option<String>, fixtures: FixtureMode) -> Self {
        Self {
            service: HttpService::new(
                endpoint,
                None,
                Duration::from_secs(DEFAULT_TIMEOUT_SECS),
                DEFAULT_RETRIES,
                DEFAULT_MAX_IN_FLIGHT,
                fixtures,
            ),
        }
    }

    /// Dense captions for an image; boxes with more than one pixel of
    /// overshoot are dropped with a warning.
    pub fn dense_captions(&self, image: &ImageBuf) -> Result<Vec<DenseCaption>, ClientError> {
        use base64::Engine as _;
        let key = hex::encode(image.content_hash());
        // The PNG is only built when the request actually goes out.
        let body = if self.service.fixtures.dir().is_some()
            && read_fixture(self.service.fixtures.dir().unwrap(), &key)?.is_some()
        {
            serde_json::json!({})
        } else {
            let png = imgio::png_bytes(image).map_err(|e| ClientError::Image(e.to_string()))?;
            let b64 = base64::engine::general_purpose::STANDARD.encode(png);
            serde_json::json!({ "image_b64": b64 })
        };
        let raw = self.service.request("/dense_captions", &key, &body)?;
        let parsed: CaptionsResponse =
            serde_json::from_str(&raw).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        Ok(wire_captions_to_dense(
            &parsed.captions,
            image.width(),
            image.height(),
        ))
    }
}

fn wire_captions_to_dense(captions: &[WireCaption], width: u32, height: u32) -> Vec<DenseCaption> {
    captions
        .iter()
        .filter_map(|c| match BoxRegion::clamp_for(c.coords, width, height) {
            Ok(region) => Some(DenseCaption {
                text: c.text.clone(),
                region,
            }),
            Err(e) => {
                log::warn!("dropping caption with invalid box: {e}");
                None
            }
        })
        .collect()
}

/// Convert raw (text, coords) caption rows to validated dense captions for
/// a specific image, dropping out-of-bounds boxes.
pub fn raw_captions_to_dense(
    rows: &[(String, [i64; 4])],
    width: u32,
    height: u32,
) -> Vec<DenseCaption> {
    let wire: Vec<WireCaption> = rows
        .iter()
        .map(|(text, coords)| WireCaption {
            text: text.clone(),
            coords: *coords,
        })
        .collect();
    wire_captions_to_dense(&wire, width, height)
}

/// Client for the `/encode` embedding service.
pub struct EncoderClient {
    service: HttpService,
}

#[derive(Deserialize)]
struct EncodeResponse {
    dim: usize,
    values: Vec<f32>,
}

impl EncoderClient {
    pub fn new(endpoint: Option<String>, fixtures: FixtureMode) -> Self {
        Self {
            service: HttpService::new(
                endpoint,
                None,
                Duration::from_secs(DEFAULT_TIMEOUT_SECS),
                DEFAULT_RETRIES,
                DEFAULT_MAX_IN_FLIGHT,
                fixtures,
            ),
        }
    }

    /// Encode an image; `key_hex` is the canonical content hash used for
    /// fixtures.
    pub fn encode_image(&self, image: &ImageBuf, key_hex: &str) -> Result<Vec<f32>, ClientError> {
        use base64::Engine as _;
        let body = if self.service.fixtures.dir().is_some()
            && read_fixture(self.service.fixtures.dir().unwrap(), key_hex)?.is_some()
        {
            serde_json::json!({})
        } else {
            let png = imgio::png_bytes(image).map_err(|e| ClientError::Image(e.to_string()))?;
            let b64 = base64::engine::general_purpose::STANDARD.encode(png);
            serde_json::json!({ "modality": "image", "payload_b64": b64 })
        };
        self.encode(key_hex, &body)
    }

    pub fn encode_text(&self, text: &str, key_hex: &str) -> Result<Vec<f32>, ClientError> {
        let body = serde_json::json!({ "modality": "text", "text": text });
        self.encode(key_hex, &body)
    }

    fn encode(&self, key_hex: &str, body: &serde_json::Value) -> Result<Vec<f32>, ClientError> {
        let raw = self.service.request("/encode", key_hex, body)?;
        let parsed: EncodeResponse =
            serde_json::from_str(&raw).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        if parsed.values.len() != parsed.dim {
            return Err(ClientError::BadResponse(format!(
                "dim {} does not match {} values",
                parsed.dim,
                parsed.values.len()
            )));
        }
        Ok(parsed.values)
    }
}
