//! Teacher-LLM elaboration of lyrics.
//!
//! Each song goes to a chat endpoint as one request: the system role as the
//! system message and the song's lines, numbered from 1, as the user message.
//! The reply must contain exactly one numbered elaboration per line; anything
//! else is retried and, if it keeps failing, the whole song is discarded.

mod client;
mod policy;
mod run;

use std::sync::Arc;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contextizer::contains_reserved_delimiter;
use crate::corpus::Song;

pub use client::{
    CallLog, ChatClient, ChatError, ChatMessage, ChatRequest, ChatResponse, EchoChatClient, HttpChatClient,
    Role, ScriptedChatClient,
};
pub use policy::{ElaborationPolicy, NoSleep, RetryPolicy, Sleeper, ThreadSleeper, TokenBucket};
pub use run::{read_store, DiscardedSong, RunError, RunReport};

const SYSTEM_ROLE_V1: &str = include_str!("../../assets/system_role_v1.txt");

/// Versioned instruction block sent as the system message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRole {
    pub version: String,
    pub text: String,
}

impl SystemRole {
    /// The eleven-guideline lyric-to-prompt instructions.
    pub fn v1() -> Self {
        Self {
            version: "v1".into(),
            text: SYSTEM_ROLE_V1.trim_end().to_string(),
        }
    }
}

impl Default for SystemRole {
    fn default() -> Self {
        Self::v1()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualElaboration {
    pub artist: String,
    pub title: String,
    pub line_index: usize,
    pub text: String,
    pub word_count: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResponseError {
    #[error("response contains no numbered list (refusal)")]
    Refusal,
    #[error("found {found} elaborations, expected {expected}")]
    Alignment { found: usize, expected: usize },
    #[error("elaboration {index} is empty")]
    EmptyItem { index: usize },
    #[error("elaboration {index} contains a reserved delimiter")]
    Leakage { index: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElaborateError {
    #[error("song {0} has no lines")]
    EmptySong(String),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

/// `1. first\n2. second…`
pub fn numbered_lines<S: AsRef<str>>(lines: &[S]) -> String {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}. {}", i + 1, l.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_request_for_lines<S: AsRef<str>>(lines: &[S], role: &SystemRole) -> ChatRequest {
    ChatRequest {
        messages: vec![
            ChatMessage { role: Role::System, content: role.text.clone() },
            ChatMessage { role: Role::User, content: numbered_lines(lines) },
        ],
    }
}

pub fn build_request(song: &Song, role: &SystemRole) -> Result<ChatRequest, ElaborateError> {
    if song.lines.is_empty() {
        return Err(ElaborateError::EmptySong(song.label()));
    }
    let texts: Vec<&str> = song.lines.iter().map(|l| l.text.as_str()).collect();
    Ok(build_request_for_lines(&texts, role))
}

static ITEM: Lazy<Regex> = Lazy::new(|| Regex::new(r#"^\s*"?\s*(\d+)\s*[.)]\s*(.*)$"#).unwrap());

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    match s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(inner) => inner.trim(),
        None => s,
    }
}

/// Split an assistant reply into `expected` elaboration texts.
///
/// Items start at lines of the form `N.` or `N)`; unnumbered lines continue
/// the previous item, and text before the first item is ignored.
pub fn parse_response(raw: &str, expected: usize) -> Result<Vec<String>, ResponseError> {
    let body = strip_quotes(raw);
    let mut items: Vec<(usize, String)> = Vec::new();
    for line in body.lines() {
        if let Some(c) = ITEM.captures(line) {
            let n: usize = c[1].parse().unwrap_or(usize::MAX);
            items.push((n, c[2].trim().to_string()));
        } else if let Some((_, last)) = items.last_mut() {
            let extra = line.trim();
            if !extra.is_empty() {
                if !last.is_empty() {
                    last.push(' ');
                }
                last.push_str(extra);
            }
        }
    }
    if !items.iter().any(|(n, _)| *n == 1) {
        return Err(ResponseError::Refusal);
    }
    if items.len() != expected {
        return Err(ResponseError::Alignment { found: items.len(), expected });
    }
    items
        .into_iter()
        .enumerate()
        .map(|(index, (_, text))| {
            let text = strip_quotes(&text).to_string();
            if text.is_empty() {
                Err(ResponseError::EmptyItem { index })
            } else if contains_reserved_delimiter(&text) {
                Err(ResponseError::Leakage { index })
            } else {
                Ok(text)
            }
        })
        .collect()
}

/// Result of elaborating one song.
#[derive(Debug, Clone, PartialEq)]
pub enum SongOutcome {
    Elaborated(Vec<VisualElaboration>),
    Discarded { reason: String, attempts: u32 },
}

/// Drives a [`ChatClient`] for whole songs under a retry and rate policy.
pub struct Elaborator<'a, C: ChatClient + ?Sized> {
    client: &'a C,
    role: SystemRole,
    policy: ElaborationPolicy,
    sleeper: Arc<dyn Sleeper>,
    limiter: Option<TokenBucket>,
}

impl<'a, C: ChatClient + ?Sized> Elaborator<'a, C> {
    pub fn new(client: &'a C, role: SystemRole, policy: ElaborationPolicy) -> Self {
        let limiter = policy.requests_per_second.map(|r| TokenBucket::new(r, policy.max_inflight.max(1) as f64));
        Self { client, role, policy, sleeper: Arc::new(ThreadSleeper), limiter }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn policy(&self) -> &ElaborationPolicy {
        &self.policy
    }

    pub fn role(&self) -> &SystemRole {
        &self.role
    }

    /// One request with retries. Returns the parsed items or the last error.
    fn request_lines(&self, lines: &[&str]) -> (Result<Vec<String>, ElaborateError>, u32) {
        let req = build_request_for_lines(lines, &self.role);
        let max = self.policy.retry.max_attempts.max(1);
        let mut last = None;
        for attempt in 1..=max {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let result = self
                .client
                .complete(&req)
                .map_err(ElaborateError::from)
                .and_then(|resp| parse_response(&resp.content, lines.len()).map_err(ElaborateError::from));
            match result {
                Ok(items) => return (Ok(items), attempt),
                Err(e) => {
                    log::debug!("attempt {attempt}/{max} failed: {e}");
                    last = Some(e);
                    if attempt < max {
                        self.sleeper.sleep(self.policy.retry.backoff(attempt));
                    }
                }
            }
        }
        (Err(last.expect("at least one attempt")), max)
    }

    /// Elaborate every line of `song`. Long songs are split into overlapping
    /// chunks; the overlap lines give each chunk context and their outputs are
    /// dropped. Any failing chunk discards the whole song.
    pub fn elaborate_song(&self, song: &Song) -> Result<SongOutcome, ElaborateError> {
        if song.lines.is_empty() {
            return Err(ElaborateError::EmptySong(song.label()));
        }
        let texts: Vec<&str> = song.lines.iter().map(|l| l.text.as_str()).collect();
        let mut out = Vec::with_capacity(texts.len());
        let mut attempts = 0;
        for chunk in self.policy.chunks(texts.len()) {
            let (result, used) = self.request_lines(&texts[chunk.start..chunk.end]);
            attempts += used;
            match result {
                Ok(items) => out.extend(items.into_iter().skip(chunk.skip)),
                Err(e) => return Ok(SongOutcome::Discarded { reason: e.to_string(), attempts }),
            }
        }
        Ok(SongOutcome::Elaborated(
            out.into_iter()
                .zip(&song.lines)
                .map(|(text, line)| VisualElaboration {
                    artist: song.artist.clone(),
                    title: song.title.clone(),
                    line_index: line.index,
                    word_count: crate::text::word_stats(&text).0,
                    text,
                })
                .collect(),
        ))
    }
}
