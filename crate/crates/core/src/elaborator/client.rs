use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Wire body for an OpenAI-style chat completion endpoint.
    pub fn to_payload(&self, model: &str, temperature: f64) -> serde_json::Value {
        json!({
            "model": model,
            "messages": self.messages,
            "temperature": temperature,
        })
    }

    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    Decode(String),
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

/// Blocking client for any endpoint that accepts `{model, messages, temperature}`
/// and answers with `choices[0].message.content`.
pub struct HttpChatClient {
    url: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(
        url: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        temperature: f64,
        timeout: Duration,
    ) -> Result<Self, ChatError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(Self { url: url.into(), api_key, model: model.into(), temperature, http })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

pub(crate) fn decode_completion(body: &str) -> Result<ChatResponse, ChatError> {
    let wire: WireResponse = serde_json::from_str(body).map_err(|e| ChatError::Decode(e.to_string()))?;
    let choice = wire.choices.into_iter().next().ok_or_else(|| ChatError::Decode("no choices".into()))?;
    Ok(ChatResponse { content: choice.message.content.unwrap_or_default(), finish_reason: choice.finish_reason })
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let mut req = self.http.post(&self.url).json(&request.to_payload(&self.model, self.temperature));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ChatError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ChatError::Status { status: status.as_u16(), body });
        }
        decode_completion(&body)
    }
}

/// Request transcript and concurrency high-water mark shared by the fake clients.
#[derive(Debug, Default)]
pub struct CallLog {
    requests: Mutex<Vec<ChatRequest>>,
    inflight: AtomicUsize,
    peak: AtomicUsize,
}

impl CallLog {
    fn enter(&self, req: &ChatRequest) -> InflightGuard<'_> {
        self.requests.lock().unwrap().push(req.clone());
        let now = self.inflight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        InflightGuard(&self.inflight)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    /// Largest number of simultaneously open requests observed.
    pub fn peak_inflight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

struct InflightGuard<'a>(&'a AtomicUsize);

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Offline stand-in for the teacher model: answers every numbered user line
/// with a deterministic scene built from the line's words.
#[derive(Debug, Default)]
pub struct EchoChatClient {
    pub log: CallLog,
    /// Artificial latency per request, to exercise concurrency limits.
    pub delay: Duration,
}

impl EchoChatClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_delay(delay: Duration) -> Self {
        Self { delay, ..Self::default() }
    }

    pub fn elaborate_line(line: &str) -> String {
        let words: Vec<String> = crate::text::tokens(line).collect();
        let subject = if words.is_empty() { "an empty stage".to_string() } else { words.join(" ") };
        format!("A painted scene of {subject}, lit by a warm golden sky.")
    }
}

impl ChatClient for EchoChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let _guard = self.log.enter(request);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let content = request
            .user_content()
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let text = l.split_once(". ").map_or(l, |(_, t)| t);
                format!("{}. {}", i + 1, Self::elaborate_line(text))
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(ChatResponse { content, finish_reason: Some("stop".into()) })
    }
}

/// Replays a fixed sequence of replies, one per request, then fails with a
/// transport error.
#[derive(Debug, Default)]
pub struct ScriptedChatClient {
    pub log: CallLog,
    script: Mutex<VecDeque<Result<String, ChatError>>>,
}

impl ScriptedChatClient {
    pub fn new(script: impl IntoIterator<Item = Result<String, ChatError>>) -> Self {
        Self { log: CallLog::default(), script: Mutex::new(script.into_iter().collect()) }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let _guard = self.log.enter(request);
        let next = self.script.lock().unwrap().pop_front();
        match next {
            Some(Ok(content)) => Ok(ChatResponse { content, finish_reason: Some("stop".into()) }),
            Some(Err(e)) => Err(e),
            None => Err(ChatError::Transport("script exhausted".into())),
        }
    }
}
