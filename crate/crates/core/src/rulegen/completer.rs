//! LLM completion backends.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationLimits {
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for GenerationLimits {
    fn default() -> Self {
        Self {
            max_tokens: 2048,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CompleterError {
    #[error("no canned response for prompt {hash} in {dir}")]
    NoFixture { hash: String, dir: PathBuf },
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
    #[error("completion request failed: {0}")]
    Request(String),
    #[error("unexpected completion payload: {0}")]
    Payload(String),
    #[error("unknown completer spec {0:?} (expected stub:<dir> or remote)")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str, limits: &GenerationLimits) -> Result<String, CompleterError>;
}

/// Hex sha256 of the prompt text; names the stub fixture file.
pub fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Canned responses read from `<dir>/<prompt hash>.txt`.
#[derive(Debug, Clone)]
pub struct StubCompleter {
    dir: PathBuf,
}

impl StubCompleter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fixture_path(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_hash(prompt)))
    }

    /// Stores `response` as the answer to `prompt`, along with the prompt
    /// itself for inspection.
    pub fn record(&self, prompt: &str, response: &str) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.fixture_path(prompt);
        fs::write(&path, response)?;
        fs::write(path.with_extension("prompt"), prompt)?;
        Ok(path)
    }
}

impl Completer for StubCompleter {
    fn complete(&self, prompt: &str, _: &GenerationLimits) -> Result<String, CompleterError> {
        let path = self.fixture_path(prompt);
        fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CompleterError::NoFixture {
                hash: prompt_hash(prompt),
                dir: self.dir.clone(),
            },
            _ => e.into(),
        })
    }
}

/// In-memory canned responses keyed by exact prompt text.
#[derive(Debug, Clone, Default)]
pub struct MapCompleter(pub HashMap<String, String>);

impl Completer for MapCompleter {
    fn complete(&self, prompt: &str, _: &GenerationLimits) -> Result<String, CompleterError> {
        self.0.get(prompt).cloned().ok_or_else(|| CompleterError::NoFixture {
            hash: prompt_hash(prompt),
            dir: PathBuf::from("<memory>"),
        })
    }
}

/// Chat-completions client for an OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct RemoteCompleter {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
}

impl RemoteCompleter {
    /// Reads `LLM_ENDPOINT`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Result<Self, CompleterError> {
        let var = |k: &'static str| std::env::var(k).map_err(|_| CompleterError::MissingEnv(k));
        Ok(Self {
            endpoint: var("LLM_ENDPOINT")?,
            api_key: var("LLM_API_KEY")?,
            model: var("LLM_MODEL")?,
            timeout: Duration::from_secs(300),
        })
    }
}

impl Completer for RemoteCompleter {
    fn complete(&self, prompt: &str, limits: &GenerationLimits) -> Result<String, CompleterError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": limits.max_tokens,
            "temperature": limits.temperature,
        });
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut resp = agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| CompleterError::Request(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| CompleterError::Payload(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| CompleterError::Payload(value.to_string()))
    }
}

/// Builds a completer from `stub:<dir>` or `remote`.
pub fn completer_from_spec(spec: &str) -> Result<Box<dyn Completer>, CompleterError> {
    if let Some(dir) = spec.strip_prefix("stub:") {
        return Ok(Box::new(StubCompleter::new(dir)));
    }
    if spec == "remote" {
        return Ok(Box::new(RemoteCompleter::from_env()?));
    }
    Err(CompleterError::Spec(spec.to_string()))
}
