//! Chat-completion clients and the on-disk response cache.
//!
//! Three pieces: a blocking HTTP client for any OpenAI-compatible
//! `/v1/chat/completions` endpoint (bearer token from the `LLM_API_KEY`
//! environment variable unless the config interpolates another source), a
//! fully deterministic mock used by every offline test and the synthetic
//! benchmark, and an append-only JSONL response cache with last-write-wins
//! replay. Clients make exactly one attempt per call; retry budgets live
//! in the engine.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use cdecr_core::math::{fnv1a64, splitmix64};
use cdecr_core::summarize::Step;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("no API key: set the LLM_API_KEY environment variable (or llm.api_key in the config)")]
    MissingApiKey,
    #[error("transport failure talking to `{url}`: {message}")]
    Transport { url: String, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion reply: {0}")]
    MalformedReply(String),
}

/// Per-call sampling parameters (the rest of the wire body is fixed).
#[derive(Debug, Clone, PartialEq)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub seed: Option<u64>,
}

/// What a request is for — lets deterministic backends answer without
/// parsing prompts, and shows up in logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestMeta {
    Summarize { doc_id: String, step: Step, mention_ids: Vec<String> },
    Direct { scope_id: String, mention_ids: Vec<String> },
}

pub trait ChatClient: Send + Sync {
    fn name(&self) -> &'static str;
    /// One attempt, no internal retries.
    fn complete(
        &self,
        params: &ChatParams,
        system: &str,
        user: &str,
        meta: &RequestMeta,
    ) -> Result<String, LlmError>;
    /// How many times `complete` has been invoked on this client.
    fn calls(&self) -> usize;
}

// ------------------------------------------------------------------ HTTP

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

/// Blocking client for `<base-url>/v1/chat/completions`.
pub struct HttpClient {
    base_url: String,
    api_key: String,
    agent: reqwest::blocking::Client,
    calls: AtomicUsize,
}

impl HttpClient {
    pub fn new(base_url: &str, api_key: String) -> Result<Self, LlmError> {
        if api_key.is_empty() {
            return Err(LlmError::MissingApiKey);
        }
        Ok(HttpClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            agent: reqwest::blocking::Client::new(),
            calls: AtomicUsize::new(0),
        })
    }
}

impl ChatClient for HttpClient {
    fn name(&self) -> &'static str {
        "http"
    }

    fn complete(
        &self,
        params: &ChatParams,
        system: &str,
        user: &str,
        _meta: &RequestMeta,
    ) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let url = format!("{}/v1/chat/completions", self.base_url);
        let body = WireRequest {
            model: &params.model,
            temperature: params.temperature,
            seed: params.seed,
            messages: vec![
                WireMessage { role: "system", content: system },
                WireMessage { role: "user", content: user },
            ],
        };
        let response = self
            .agent
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::Transport { url: url.clone(), message: e.to_string() })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(LlmError::Status { status: status.as_u16(), body });
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| LlmError::MalformedReply(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedReply("empty choices array".into()))
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

// ------------------------------------------------------------------ mock

/// Deterministic offline backend. Summarization requests get one
/// correctly formatted elaboration (or paraphrase) line per mention,
/// built from the registered surface and either a registered fact phrase
/// (the synthetic generator's "summary bank") or a seeded pseudo-fact.
/// Direct requests get a JSON mention→cluster mapping: the registered
/// gold assignment when one was provided, otherwise a seeded grouping.
pub struct MockLlm {
    seed: u64,
    surfaces: BTreeMap<String, String>,
    facts: BTreeMap<String, String>,
    direct_map: Option<BTreeMap<String, String>>,
    calls: AtomicUsize,
}

impl MockLlm {
    pub fn new(seed: u64) -> Self {
        MockLlm {
            seed,
            surfaces: BTreeMap::new(),
            facts: BTreeMap::new(),
            direct_map: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Register mention surfaces (mention id → surface text).
    pub fn with_surfaces(mut self, surfaces: BTreeMap<String, String>) -> Self {
        self.surfaces = surfaces;
        self
    }

    /// Register the fact phrases embedded in generated elaborations.
    pub fn with_facts(mut self, facts: BTreeMap<String, String>) -> Self {
        self.facts = facts;
        self
    }

    /// Make direct-prediction replies echo this mention → label mapping.
    pub fn with_direct_map(mut self, map: BTreeMap<String, String>) -> Self {
        self.direct_map = Some(map);
        self
    }

    fn surface(&self, mention_id: &str) -> String {
        self.surfaces.get(mention_id).cloned().unwrap_or_else(|| mention_id.to_string())
    }

    fn fact_phrase(&self, mention_id: &str) -> String {
        if let Some(f) = self.facts.get(mention_id) {
            return f.clone();
        }
        let mut state = self.seed.wrapping_add(fnv1a64(mention_id.as_bytes()));
        format!("a distinct fact-{} event", splitmix64(&mut state) % 9973)
    }

    fn summarize_reply(&self, step: Step, mention_ids: &[String]) -> String {
        let mut out = String::new();
        for (i, id) in mention_ids.iter().enumerate() {
            let surface = self.surface(id);
            let facts = self.fact_phrase(id);
            match step {
                Step::One => {
                    out.push_str(&format!("{}. Elaboration: {surface} refers to {facts}.\n", i + 1))
                }
                Step::Two => out.push_str(&format!(
                    "{}. Elaboration: {surface} refers to {facts}, with entities and dates resolved.\n",
                    i + 1
                )),
                Step::Paraphrase => out.push_str(&format!(
                    "{}. Paraphrase: The passage reports that {surface} was {facts}.\n",
                    i + 1
                )),
            }
        }
        out
    }

    fn direct_reply(&self, mention_ids: &[String]) -> String {
        let mapping: BTreeMap<String, String> = mention_ids
            .iter()
            .map(|id| {
                let label = match &self.direct_map {
                    Some(map) => {
                        map.get(id).cloned().unwrap_or_else(|| format!("solo-{id}"))
                    }
                    None => {
                        let mut state = self.seed.wrapping_add(fnv1a64(id.as_bytes()));
                        format!("g{}", splitmix64(&mut state) % 4)
                    }
                };
                (id.clone(), label)
            })
            .collect();
        serde_json::to_string(&mapping).expect("string map serializes infallibly")
    }
}

impl ChatClient for MockLlm {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn complete(
        &self,
        _params: &ChatParams,
        _system: &str,
        _user: &str,
        meta: &RequestMeta,
    ) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match meta {
            RequestMeta::Summarize { step, mention_ids, .. } => {
                self.summarize_reply(*step, mention_ids)
            }
            RequestMeta::Direct { mention_ids, .. } => self.direct_reply(mention_ids),
        })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

// ----------------------------------------------------------------- cache

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    request_digest: String,
    response_text: String,
    timestamp: u64,
}

/// Append-only JSONL response cache. Records are replayed on open with
/// last-write-wins, so a crashed run resumes from whatever it managed to
/// append; duplicate keys are harmless.
pub struct ResponseCache {
    map: Mutex<BTreeMap<String, String>>,
    file: Mutex<Option<File>>,
}

impl ResponseCache {
    /// Open (or create) a cache file and replay its records.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut map = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn final line from a crash is skipped, not fatal
                if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
                    map.insert(record.key, record.response_text);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResponseCache { map: Mutex::new(map), file: Mutex::new(Some(file)) })
    }

    /// A cache that never touches disk (tests, one-shot runs).
    pub fn in_memory() -> Self {
        ResponseCache { map: Mutex::new(BTreeMap::new()), file: Mutex::new(None) }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.map.lock().expect("cache lock").get(key).cloned()
    }

    pub fn put(&self, key: &str, request_digest: &str, response: &str) -> std::io::Result<()> {
        self.map
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), response.to_string());
        let mut guard = self.file.lock().expect("cache file lock");
        if let Some(file) = guard.as_mut() {
            let record = CacheRecord {
                key: key.to_string(),
                request_digest: request_digest.to_string(),
                response_text: response.to_string(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let mut line = serde_json::to_string(&record).expect("cache record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Digest of one request's full text content (for the cache record).
/// Length-prefixed fields, so `("ab","c")` and `("a","bc")` differ.
pub fn request_digest(system: &str, user: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [system, user] {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
