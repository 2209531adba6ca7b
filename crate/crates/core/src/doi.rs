//! DOI metadata lookup against a works-style registry API, with an on-disk
//! cache that doubles as an offline fixture store.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::charstream::MetadataRecord;

pub const DEFAULT_BASE_URL: &str = "https://api.crossref.org";
/// Environment variable that overrides the configured base URL.
pub const BASE_URL_ENV: &str = "LAME_DOI_BASE_URL";

// Everything but RFC 3986 unreserved characters.
const DOI_ENCODE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

static DOI_PATTERN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^10\.[0-9]+(\.[0-9]+)*/\S+$").unwrap());
static MARKUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

#[derive(Debug, thiserror::Error)]
pub enum DoiError {
    #[error("invalid DOI {0:?}")]
    InvalidDoi(String),
    #[error("no metadata found for DOI {0}")]
    NotFound(String),
    #[error("upstream failure for DOI {doi}: {reason}")]
    Upstream { doi: String, reason: String },
    #[error("invalid DOI client configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoiMode {
    Online,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoiClientConfig {
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub mode: DoiMode,
    /// Seconds between outbound requests.
    pub min_request_interval: f64,
    /// Seconds.
    pub timeout: f64,
}

impl Default for DoiClientConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            cache_dir: PathBuf::from("doi-cache"),
            mode: DoiMode::Fixture,
            min_request_interval: 1.0,
            timeout: 10.0,
        }
    }
}

impl DoiClientConfig {
    pub fn fixture(cache_dir: impl Into<PathBuf>) -> Self {
        Self { cache_dir: cache_dir.into(), mode: DoiMode::Fixture, ..Default::default() }
    }

    pub fn online(base_url: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self { base_url: base_url.into(), cache_dir: cache_dir.into(), mode: DoiMode::Online, ..Default::default() }
    }

    /// Applies the base URL override from the environment, if set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                self.base_url = url;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), DoiError> {
        if !(self.min_request_interval.is_finite() && self.min_request_interval >= 0.0) {
            return Err(DoiError::Config("min_request_interval must be >= 0".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(DoiError::Config("timeout must be > 0".into()));
        }
        if self.mode == DoiMode::Online && self.base_url.trim().is_empty() {
            return Err(DoiError::Config("base_url is required in online mode".into()));
        }
        Ok(())
    }
}

pub fn is_valid_doi(doi: &str) -> bool {
    DOI_PATTERN.is_match(doi)
}

pub fn encode_doi(doi: &str) -> String {
    utf8_percent_encode(doi, DOI_ENCODE).to_string()
}

pub fn cache_path(cache_dir: &Path, doi: &str) -> PathBuf {
    cache_dir.join(format!("{}.json", encode_doi(doi)))
}

/// Maps a works-style document (either the full envelope with `message` or
/// the bare message) onto a record. Only English fields are filled.
pub fn map_works_response(doi: &str, body: &Value) -> MetadataRecord {
    let msg = body.get("message").unwrap_or(body);
    let strings = |key: &str| -> Option<Vec<String>> {
        let items: Vec<String> = msg
            .get(key)?
            .as_array()?
            .iter()
            .filter_map(|v| v.as_str())
            .map(collapse)
            .filter(|s| !s.is_empty())
            .collect();
        (!items.is_empty()).then_some(items)
    };
    let title_en = strings("title").map(|t| t.join(" "));
    let keywords_en = strings("subject");
    let abstract_en = msg
        .get("abstract")
        .and_then(Value::as_str)
        .map(|a| collapse(&MARKUP.replace_all(a, " ")))
        .filter(|a| !a.is_empty());
    let author_names_en = msg.get("author").and_then(Value::as_array).and_then(|authors| {
        let names: Vec<String> = authors
            .iter()
            .filter_map(|a| {
                let given = a.get("given").and_then(Value::as_str).unwrap_or("");
                let family = a.get("family").and_then(Value::as_str).unwrap_or("");
                let name = a.get("name").and_then(Value::as_str).unwrap_or("");
                let full = collapse(&format!("{given} {family}"));
                if full.is_empty() {
                    (!name.trim().is_empty()).then(|| collapse(name))
                } else {
                    Some(full)
                }
            })
            .collect();
        (!names.is_empty()).then_some(names)
    });
    let affiliations_en = msg.get("author").and_then(Value::as_array).and_then(|authors| {
        let mut orgs: Vec<String> = Vec::new();
        for a in authors {
            for aff in a.get("affiliation").and_then(Value::as_array).into_iter().flatten() {
                if let Some(name) = aff.get("name").and_then(Value::as_str) {
                    let name = collapse(name);
                    if !name.is_empty() && !orgs.contains(&name) {
                        orgs.push(name);
                    }
                }
            }
        }
        (!orgs.is_empty()).then_some(orgs)
    });
    MetadataRecord {
        doc_id: doi.to_string(),
        title_en,
        abstract_en,
        keywords_en,
        author_names_en,
        affiliations_en,
        doi: Some(msg.get("DOI").and_then(Value::as_str).unwrap_or(doi).to_string()),
        ..Default::default()
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Reads a cached or fixture record. Both the mapped-record form and a raw
/// works document are accepted.
fn read_cached(path: &Path, doi: &str) -> Result<Option<MetadataRecord>, DoiError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(DoiError::Upstream { doi: doi.into(), reason: format!("cache read: {e}") }),
    };
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| DoiError::Upstream { doi: doi.into(), reason: format!("cache parse: {e}") })?;
    let works_style = value.get("message").is_some() || value.get("title").is_some_and(Value::is_array);
    if works_style {
        return Ok(Some(map_works_response(doi, &value)));
    }
    serde_json::from_value(value)
        .map(Some)
        .map_err(|e| DoiError::Upstream { doi: doi.into(), reason: format!("cache parse: {e}") })
}

fn write_cached(path: &Path, record: &MetadataRecord) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("json.tmp.{}", std::process::id()));
    fs::write(&tmp, serde_json::to_string_pretty(record).expect("record serialization cannot fail"))?;
    fs::rename(&tmp, path)
}

/// DOI lookup client. Outbound requests are serialized and spaced by the
/// configured interval.
pub struct DoiClient {
    config: DoiClientConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
    requests: AtomicUsize,
}

impl DoiClient {
    pub fn new(config: DoiClientConfig) -> Result<Self, DoiError> {
        config.validate()?;
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
                .http_status_as_error(false)
                .build(),
        );
        Ok(Self { config, agent, last_request: Mutex::new(None), requests: AtomicUsize::new(0) })
    }

    pub fn config(&self) -> &DoiClientConfig {
        &self.config
    }

    /// Number of network requests issued so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn fetch_metadata(&self, doi: &str) -> Result<MetadataRecord, DoiError> {
        let doi = doi.trim();
        if !is_valid_doi(doi) {
            return Err(DoiError::InvalidDoi(doi.to_string()));
        }
        let path = cache_path(&self.config.cache_dir, doi);
        if let Some(record) = read_cached(&path, doi)? {
            return Ok(record);
        }
        match self.config.mode {
            DoiMode::Fixture => Err(DoiError::NotFound(doi.to_string())),
            DoiMode::Online => {
                let record = self.request(doi)?;
                write_cached(&path, &record)
                    .map_err(|e| DoiError::Upstream { doi: doi.into(), reason: format!("cache write: {e}") })?;
                Ok(record)
            }
        }
    }

    fn request(&self, doi: &str) -> Result<MetadataRecord, DoiError> {
        let upstream = |reason: String| DoiError::Upstream { doi: doi.to_string(), reason };
        let url = format!("{}/works/{}", self.config.base_url.trim_end_matches('/'), encode_doi(doi));

        // Holding the lock for the whole exchange keeps a single request lane.
        let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(prev) = *last {
            let wait = Duration::from_secs_f64(self.config.min_request_interval);
            let elapsed = prev.elapsed();
            if elapsed < wait {
                thread::sleep(wait - elapsed);
            }
        }
        *last = Some(Instant::now());
        self.requests.fetch_add(1, Ordering::SeqCst);

        let mut response =
            self.agent.get(&url).header("Accept", "application/json").call().map_err(|e| upstream(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 404 {
            return Err(DoiError::NotFound(doi.to_string()));
        }
        if !(200..300).contains(&status) {
            return Err(upstream(format!("HTTP {status}")));
        }
        let body = response.body_mut().read_to_string().map_err(|e| upstream(e.to_string()))?;
        let value: Value = serde_json::from_str(&body).map_err(|e| upstream(format!("parse: {e}")))?;
        Ok(map_works_response(doi, &value))
    }
}

/// One-shot lookup with a fresh client.
pub fn fetch_metadata(doi: &str, config: &DoiClientConfig) -> Result<MetadataRecord, DoiError> {
    DoiClient::new(config.clone())?.fetch_metadata(doi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn doi_pattern() {
        assert!(is_valid_doi("10.5555/test"));
        assert!(is_valid_doi("10.1000.10/abc(1)-x"));
        assert!(!is_valid_doi("not-a-doi"));
        assert!(!is_valid_doi("10.abc/x"));
        assert!(!is_valid_doi("10.1234/"));
    }

    #[test]
    fn encoding_escapes_slash() {
        assert_eq!(encode_doi("10.5555/a b"), "10.5555%2Fa%20b");
    }

    #[test]
    fn fixture_passthrough_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DoiClientConfig::fixture(dir.path());
        fs::write(cache_path(dir.path(), "10.5555/test"), r#"{"doc_id":"x","title_en":"Sample"}"#).unwrap();
        let rec = fetch_metadata("10.5555/test", &cfg).unwrap();
        assert_eq!(rec.title_en.as_deref(), Some("Sample"));
        assert!(matches!(fetch_metadata("10.5555/absent", &cfg), Err(DoiError::NotFound(d)) if d == "10.5555/absent"));
        assert!(matches!(fetch_metadata("not-a-doi", &cfg), Err(DoiError::InvalidDoi(_))));
    }

    #[test]
    fn works_mapping() {
        let body = json!({"status": "ok", "message": {
            "DOI": "10.5555/test",
            "title": ["Layout  aware", "extraction"],
            "abstract": "<jats:p>We propose <jats:italic>a</jats:italic> method.</jats:p>",
            "subject": ["Computer Science"],
            "author": [
                {"given": "Minsu", "family": "Kim", "affiliation": [{"name": "Seoul University"}]},
                {"name": "KISTI Team", "affiliation": [{"name": "Seoul University"}]}
            ]
        }});
        let rec = map_works_response("10.5555/test", &body);
        assert_eq!(rec.title_en.as_deref(), Some("Layout aware extraction"));
        assert_eq!(rec.abstract_en.as_deref(), Some("We propose a method."));
        assert_eq!(rec.keywords_en, Some(vec!["Computer Science".to_string()]));
        assert_eq!(rec.author_names_en, Some(vec!["Minsu Kim".to_string(), "KISTI Team".to_string()]));
        assert_eq!(rec.affiliations_en, Some(vec!["Seoul University".to_string()]));
        assert!(rec.title_ko.is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = DoiClientConfig::online("", "x");
        assert!(cfg.validate().is_err());
        cfg.base_url = "http://localhost".into();
        assert!(cfg.validate().is_ok());
        cfg.min_request_interval = -1.0;
        assert!(cfg.validate().is_err());
    }
}
