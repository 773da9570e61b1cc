//! Chat backends: a remote chat-completion endpoint, a canned table, a
//! transcript replayer, and wrappers for recording and throttling.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::format::{render_condition, restrict, ChatKind};
use super::prompt::{kind_of, query_of};
use crate::types::TaskCondition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("unexpected response shape: {0}")]
    Protocol(String),
    #[error("no recorded response for this conversation")]
    NoEntry,
    #[error("missing configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Anything that can answer a chat. Implementations are shared between
/// threads.
pub trait ChatBackend: Send + Sync {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        (**self).send(messages, temperature)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        (**self).send(messages, temperature)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        (**self).send(messages, temperature)
    }
}

/// Text key identifying a whole conversation.
pub fn conversation_key(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            format!("[{role}]\n{}", m.content)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Canned answers keyed by the queried task name and chat kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MockTable {
    answers: BTreeMap<(String, ChatKind), String>,
}

impl MockTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: impl Into<String>, kind: ChatKind, text: impl Into<String>) {
        self.answers.insert((task.into(), kind), text.into());
    }

    /// Answers every chat kind with the rendering of the given conditions.
    pub fn from_conditions<'a>(conds: impl IntoIterator<Item = &'a TaskCondition>) -> Self {
        let mut table = Self::new();
        for c in conds {
            for kind in [ChatKind::Combined, ChatKind::Spatial, ChatKind::States] {
                table.insert(c.task_name.clone(), kind, render_condition(&restrict(c, kind)));
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl ChatBackend for MockTable {
    fn send(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, BackendError> {
        let prompt = messages
            .iter()
            .find(|m| m.role == Role::User)
            .ok_or(BackendError::NoEntry)?;
        let query = query_of(&prompt.content).ok_or(BackendError::NoEntry)?;
        self.answers
            .get(&(query.to_string(), kind_of(&prompt.content)))
            .cloned()
            .ok_or(BackendError::NoEntry)
    }
}

/// One line of a transcript file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt: String,
    pub response: String,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

/// Serves responses from a recorded transcript. A conversation recorded
/// several times is answered in recorded order; the last answer repeats.
#[derive(Debug, Default)]
pub struct ReplayLog {
    entries: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayLog {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut map: HashMap<String, VecDeque<String>> = HashMap::new();
        for e in entries {
            map.entry(e.prompt).or_default().push_back(e.response);
        }
        Self {
            entries: Mutex::new(map),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let file = File::open(path).map_err(|e| BackendError::Io(e.to_string()))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry =
                serde_json::from_str(&line).map_err(|e| BackendError::Io(format!("line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        Ok(Self::from_entries(entries))
    }
}

impl ChatBackend for ReplayLog {
    fn send(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, BackendError> {
        let mut map = self.entries.lock().expect("replay lock poisoned");
        let queue = map.get_mut(&conversation_key(messages)).ok_or(BackendError::NoEntry)?;
        if queue.len() > 1 {
            Ok(queue.pop_front().expect("non-empty"))
        } else {
            queue.front().cloned().ok_or(BackendError::NoEntry)
        }
    }
}

/// Answers from a fixed list in order, then keeps repeating the last one.
#[derive(Debug)]
pub struct Scripted {
    answers: Mutex<VecDeque<Result<String, BackendError>>>,
}

impl Scripted {
    pub fn new(answers: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self {
            answers: Mutex::new(answers.into_iter().collect()),
        }
    }
}

impl ChatBackend for Scripted {
    fn send(&self, _messages: &[ChatMessage], _temperature: f64) -> Result<String, BackendError> {
        let mut q = self.answers.lock().expect("script lock poisoned");
        match q.len() {
            0 => Err(BackendError::NoEntry),
            1 => q.front().cloned().expect("non-empty"),
            _ => q.pop_front().expect("non-empty"),
        }
    }
}

/// Appends every exchange with the inner backend to a transcript file.
pub struct Recording<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: ChatBackend> Recording<B> {
    pub fn new(inner: B, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Io(e.to_string()))?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<B: ChatBackend> ChatBackend for Recording<B> {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        let response = self.inner.send(messages, temperature)?;
        let entry = TranscriptEntry {
            prompt: conversation_key(messages),
            response: response.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
        };
        let line = serde_json::to_string(&entry).map_err(|e| BackendError::Io(e.to_string()))?;
        let mut f = self.out.lock().expect("transcript lock poisoned");
        writeln!(f, "{line}").map_err(|e| BackendError::Io(e.to_string()))?;
        Ok(response)
    }
}

/// Bounds the number of requests in flight through the inner backend.
pub struct Throttled<B> {
    inner: B,
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

/// Default bound on concurrent requests.
pub const DEFAULT_PARALLEL_REQUESTS: usize = 4;

impl<B: ChatBackend> Throttled<B> {
    pub fn new(inner: B, limit: usize) -> Self {
        Self {
            inner,
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

impl<B: ChatBackend> ChatBackend for Throttled<B> {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        {
            let mut n = self.in_flight.lock().expect("throttle lock poisoned");
            while *n >= self.limit {
                n = self.freed.wait(n).expect("throttle lock poisoned");
            }
            *n += 1;
        }
        let out = self.inner.send(messages, temperature);
        *self.in_flight.lock().expect("throttle lock poisoned") -= 1;
        self.freed.notify_one();
        out
    }
}

/// A chat-completion HTTP endpoint: POSTs `{model, messages, temperature}`
/// and reads `choices[0].message.content`.
pub struct RemoteEndpoint {
    url: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

pub const ENV_URL: &str = "LLM_API_URL";
pub const ENV_MODEL: &str = "LLM_MODEL";
pub const ENV_KEY: &str = "LLM_API_KEY";

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl RemoteEndpoint {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            api_key,
            model: model.into(),
            client,
        })
    }

    /// Configured from `LLM_API_URL`, `LLM_MODEL` and (optionally) `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let url = var(ENV_URL).ok_or_else(|| BackendError::Config(ENV_URL.into()))?;
        let model = var(ENV_MODEL).ok_or_else(|| BackendError::Config(ENV_MODEL.into()))?;
        Self::new(url, model, var(ENV_KEY))
    }
}

impl ChatBackend for RemoteEndpoint {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.url).json(&CompletionRequest {
            model: &self.model,
            messages,
            temperature,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Status(status.as_u16()));
        }
        let body: CompletionResponse = resp.json().map_err(|e| BackendError::Protocol(e.to_string()))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("no choices".into()))
    }
}
