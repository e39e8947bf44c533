//! Caption extraction: a client for an OCR.space-style HTTP service, and an
//! offline JSONL captions source for deterministic runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcrError {
    #[error("OCR request timed out after {attempts} attempt(s): {detail}")]
    OcrTimeout { attempts: u32, detail: String },
    #[error("OCR service error: {0}")]
    OcrServiceError(String),
    #[error("no caption for meme id {0:?}")]
    MissingCaption(String),
    #[error("captions file {path}: {detail}")]
    BadCaptionsFile { path: String, detail: String },
    #[error("invalid OCR configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, OcrError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OcrMode {
    Remote,
    #[default]
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcrConfig {
    pub endpoint: String,
    pub api_key: String,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    /// Total number of attempts made before giving up (at least one).
    pub max_retries: u32,
    /// First backoff delay in seconds; doubles after every failed attempt.
    pub backoff_base: f64,
    pub mode: OcrMode,
    /// Optional OCR language code passed through to the service.
    pub language: Option<String>,
    /// Concurrent requests when processing a batch.
    pub workers: usize,
}

impl Default for OcrConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.ocr.space/parse/image".into(),
            api_key: String::new(),
            timeout: 30.0,
            max_retries: 3,
            backoff_base: 1.0,
            mode: OcrMode::Offline,
            language: None,
            workers: 4,
        }
    }
}

impl OcrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0) {
            return Err(OcrError::InvalidConfig(format!("timeout must be positive, got {}", self.timeout)));
        }
        if self.backoff_base < 0.0 {
            return Err(OcrError::InvalidConfig("backoff_base must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionSource {
    Remote,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub meme_id: String,
    /// Possibly mixed Devanagari/Roman text.
    pub raw_text: String,
    pub source: CaptionSource,
    pub confidence: Option<f64>,
    /// Non-fatal problem, e.g. the service found no text.
    pub warning: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct ServiceResponse {
    #[serde(default)]
    parsed_results: Vec<ParsedResult>,
    #[serde(default)]
    is_errored_on_processing: bool,
    #[serde(default)]
    error_message: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct ParsedResult {
    #[serde(default)]
    parsed_text: String,
}

/// Joins every non-empty text line of every parsed region with single spaces.
fn parse_service_body(body: &str) -> Result<String> {
    let resp: ServiceResponse =
        serde_json::from_str(body).map_err(|e| OcrError::OcrServiceError(format!("unparseable response: {e}")))?;
    if resp.is_errored_on_processing {
        let msg = resp.error_message.map(|m| m.to_string()).unwrap_or_else(|| "processing failed".into());
        return Err(OcrError::OcrServiceError(msg));
    }
    let lines: Vec<&str> = resp
        .parsed_results
        .iter()
        .flat_map(|r| r.parsed_text.lines())
        .flat_map(str::split_whitespace)
        .collect();
    Ok(lines.join(" "))
}

fn multipart_body(image: &[u8], language: Option<&str>) -> (String, Vec<u8>) {
    let boundary = format!("memeforge-{:016x}", image.len() as u64 ^ 0x5eed_cafe_f00d_d00d);
    let mut body = Vec::with_capacity(image.len() + 512);
    if let Some(lang) = language {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"language\"\r\n\r\n{lang}\r\n").as_bytes(),
        );
    }
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"meme.png\"\r\nContent-Type: image/png\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(image);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

enum Attempt {
    Done(String),
    Retry(OcrError),
    Fatal(OcrError),
}

fn attempt(agent: &ureq::Agent, cfg: &OcrConfig, content_type: &str, body: &[u8]) -> Attempt {
    let sent = agent
        .post(&cfg.endpoint)
        .header("apikey", &cfg.api_key)
        .header("Content-Type", content_type)
        .send(body);
    let mut resp = match sent {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(OcrError::OcrTimeout { attempts: 0, detail: e.to_string() }),
    };
    let status = resp.status().as_u16();
    let text = match resp.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(OcrError::OcrTimeout { attempts: 0, detail: e.to_string() }),
    };
    match status {
        200..=299 => match parse_service_body(&text) {
            Ok(t) => Attempt::Done(t),
            Err(e) => Attempt::Fatal(e),
        },
        429 | 500..=599 => Attempt::Retry(OcrError::OcrServiceError(format!("HTTP {status}"))),
        _ => Attempt::Fatal(OcrError::OcrServiceError(format!("HTTP {status}: {}", text.trim()))),
    }
}

/// Posts the (already preprocessed, PNG-encoded) image to the OCR service.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff; other 4xx responses and error flags in the body fail at once. An
/// empty result is not an error: the record carries an empty caption and a
/// warning.
pub fn extract_remote(meme_id: &str, img_bytes: &[u8], cfg: &OcrConfig) -> Result<CaptionRecord> {
    cfg.validate()?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.timeout)))
        .http_status_as_error(false)
        .build()
        .into();
    let (content_type, body) = multipart_body(img_bytes, cfg.language.as_deref());
    let attempts = cfg.max_retries.max(1);
    let mut last = None;
    for n in 0..attempts {
        if n > 0 {
            let delay = cfg.backoff_base * f64::from(1u32 << (n - 1).min(16));
            std::thread::sleep(Duration::from_secs_f64(delay));
        }
        match attempt(&agent, cfg, &content_type, &body) {
            Attempt::Done(text) => {
                let warning = text.is_empty().then(|| "OCR service returned no text".to_string());
                if let Some(w) = &warning {
                    log::warn!("{meme_id}: {w}");
                }
                return Ok(CaptionRecord {
                    meme_id: meme_id.to_string(),
                    raw_text: text,
                    source: CaptionSource::Remote,
                    confidence: None,
                    warning,
                });
            }
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(e) => {
                log::debug!("{meme_id}: OCR attempt {} failed: {e}", n + 1);
                last = Some(e);
            }
        }
    }
    Err(match last.expect("at least one attempt") {
        OcrError::OcrTimeout { detail, .. } => OcrError::OcrTimeout { attempts, detail },
        other => other,
    })
}

#[derive(Deserialize)]
struct CaptionLine {
    id: String,
    text: String,
}

/// In-memory view of an offline captions JSONL file.
#[derive(Debug, Clone, Default)]
pub struct OfflineCaptions {
    captions: BTreeMap<String, String>,
    pub duplicate_ids: Vec<String>,
}

impl OfflineCaptions {
    /// Parses `{"id": ..., "text": ...}` lines. A repeated id keeps its last
    /// entry and is reported in `duplicate_ids`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CaptionLine = serde_json::from_str(line).map_err(|e| OcrError::BadCaptionsFile {
                path: origin.to_string(),
                detail: format!("line {}: {e}", n + 1),
            })?;
            if out.captions.insert(rec.id.clone(), rec.text).is_some() {
                log::warn!("{origin}: duplicate caption id {:?}, last entry wins", rec.id);
                out.duplicate_ids.push(rec.id);
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OcrError::BadCaptionsFile { path: path.display().to_string(), detail: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, meme_id: &str) -> Result<CaptionRecord> {
        let text = self.captions.get(meme_id).ok_or_else(|| OcrError::MissingCaption(meme_id.to_string()))?;
        Ok(CaptionRecord {
            meme_id: meme_id.to_string(),
            raw_text: text.clone(),
            source: CaptionSource::Offline,
            confidence: None,
            warning: None,
        })
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

/// Looks `meme_id` up in a captions JSONL file.
pub fn extract_offline(meme_id: &str, captions_file: &Path) -> Result<CaptionRecord> {
    OfflineCaptions::load(captions_file)?.get(meme_id)
}
