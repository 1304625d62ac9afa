//! Chat-session migration protocol with deterministic record/replay.
//!
//! A migration session sends four user messages (the old grammar, the new
//! grammar and the instance, each behind a short hint asking the model to
//! remember it, then the final task prompt) and takes the single assistant
//! response as the evolved instance. Stripping surrounding code fences is the
//! only post-processing; outputs are never repaired or retried.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Default task prompt sent after the three artifacts.
pub const DEFAULT_FINAL_PROMPT: &str = "grammar_1 is the initial grammar of the DSL. We evolved it to get grammar_2. instance_1 was originally a text instance that followed grammar_1. Now I want you to analyze the differences between the two versions of the grammar and, based on this difference, modify instance_1 and get instance_2, which will follow grammar_2. Please address the following things:\n1. When evolving the instance, please do not omit any mandatory elements, such as characters enclosed by single quotes.\n2. If grammar_2 adds a new grammar rule or a new attribute that is optional or in an \"OR\" relationship (i.e., |), then please do not instantiate it.\n3. Do not miss or add any auxiliary information in the instance, e.g., comments, formats (white space, indents, tabs, empty lines, etc.).";

pub const DEFAULT_HINT_GRAMMAR_OLD: &str = "Here is the initial version of the grammar (i.e., Grammar 1). Please remember this for future reference\n\n{content}";
pub const DEFAULT_HINT_GRAMMAR_NEW: &str = "Here is the evolved version of the grammar (i.e., Grammar 2). Please remember this for future reference\n\n{content}";
pub const DEFAULT_HINT_INSTANCE: &str = "Here is the instance that conforms to Grammar 1 (i.e., Instance 1). Please remember this for future reference\n\n{content}";

/// Session prompt configuration. Hint templates embed the artifact text at
/// the `{content}` placeholder; the final prompt is sent byte-exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub hint_grammar_old: String,
    pub hint_grammar_new: String,
    pub hint_instance: String,
    pub final_prompt: String,
    pub max_output_tokens: u32,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            hint_grammar_old: DEFAULT_HINT_GRAMMAR_OLD.to_string(),
            hint_grammar_new: DEFAULT_HINT_GRAMMAR_NEW.to_string(),
            hint_instance: DEFAULT_HINT_INSTANCE.to_string(),
            final_prompt: DEFAULT_FINAL_PROMPT.to_string(),
            max_output_tokens: 64000,
        }
    }
}

impl PromptConfig {
    /// The four user messages of one session, in protocol order.
    pub fn request_messages(
        &self,
        grammar_old: &str,
        grammar_new: &str,
        instance: &str,
    ) -> Vec<Message> {
        vec![
            Message::user(self.hint_grammar_old.replacen("{content}", grammar_old, 1)),
            Message::user(self.hint_grammar_new.replacen("{content}", grammar_new, 1)),
            Message::user(self.hint_instance.replacen("{content}", instance, 1)),
            Message::user(self.final_prompt.clone()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionOutcome {
    Completed,
    /// The assistant returned no content. Recorded, not retried.
    EmptyResponse,
}

/// One completed migration exchange: the four requests plus the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationSession {
    pub messages: Vec<Message>,
    pub provider_id: String,
    pub wall_clock_s: f64,
    /// Assistant response with surrounding code fences stripped.
    pub output: String,
    pub outcome: SessionOutcome,
}

#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub content: String,
    pub wall_clock_s: f64,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider returned status {status}: {message}")]
    Api { status: u16, message: String },
    #[error("no recorded response for request key {key}")]
    ReplayMiss { key: String },
    #[error("response exceeded the configured output token budget")]
    TokenBudgetExceeded,
    #[error("scripted provider ran out of responses")]
    ScriptExhausted,
}

#[derive(Debug, Error)]
pub enum MigrateError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A chat-completion backend. Implementations must be safe for concurrent
/// sessions; any internal state sits behind interior mutability.
pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(
        &self,
        messages: &[Message],
        max_output_tokens: u32,
    ) -> Result<ChatResponse, ProviderError>;
}

/// Runs one migration session and returns it with the evolved instance text.
///
/// An empty assistant response yields a session with
/// [`SessionOutcome::EmptyResponse`] and `output = ""` rather than an error,
/// so failed runs still enter the evaluation like any other.
pub fn run_migration(
    grammar_old: &str,
    grammar_new: &str,
    instance: &str,
    config: &PromptConfig,
    provider: &dyn ChatProvider,
) -> Result<MigrationSession, MigrateError> {
    let request = config.request_messages(grammar_old, grammar_new, instance);
    let response = provider.complete(&request, config.max_output_tokens.max(1))?;
    let (output, outcome) = if response.content.trim().is_empty() {
        (String::new(), SessionOutcome::EmptyResponse)
    } else {
        (
            strip_code_fences(&response.content),
            SessionOutcome::Completed,
        )
    };
    let mut messages = request;
    messages.push(Message::assistant(response.content));
    Ok(MigrationSession {
        messages,
        provider_id: provider.id().to_string(),
        wall_clock_s: response.wall_clock_s.max(0.0),
        output,
        outcome,
    })
}

/// Runs `n` independent sessions (no shared conversation state). Per-session
/// errors are collected, not fatal; `on_session` fires after each session so
/// callers can persist results before the next begins.
pub fn run_repetitions(
    grammar_old: &str,
    grammar_new: &str,
    instance: &str,
    config: &PromptConfig,
    provider: &dyn ChatProvider,
    n: usize,
    mut on_session: impl FnMut(usize, &Result<MigrationSession, MigrateError>),
) -> Vec<Result<MigrationSession, MigrateError>> {
    let mut out = Vec::with_capacity(n);
    for run in 0..n {
        let result = run_migration(grammar_old, grammar_new, instance, config, provider);
        on_session(run, &result);
        out.push(result);
    }
    out
}

/// Strips one surrounding code fence (```…```), the only post-processing
/// applied to assistant output.
pub fn strip_code_fences(text: &str) -> String {
    let trimmed = text.trim();
    if !trimmed.starts_with("```") {
        return text.to_string();
    }
    let Some(open_end) = trimmed.find('\n') else {
        return text.to_string();
    };
    let body = &trimmed[open_end + 1..];
    let Some(close) = body.rfind("```") else {
        return text.to_string();
    };
    let inner = &body[..close];
    if !inner.is_empty() && !inner.ends_with('\n') {
        return text.to_string();
    }
    inner.to_string()
}

/// Content hash identifying a request: provider id plus the full message
/// sequence.
pub fn request_key(provider_id: &str, messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(provider_id.as_bytes());
    hasher.update([0]);
    for message in messages {
        hasher.update(match message.role {
            Role::User => b"u",
            Role::Assistant => b"a",
        });
        hasher.update(message.content.len().to_le_bytes());
        hasher.update(message.content.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// One recorded exchange in the transcript store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub key: String,
    pub request_messages: Vec<Message>,
    pub response: String,
    pub wall_clock_s: f64,
}

/// Line-delimited JSON transcript store. Reads are immutable; recording
/// appends.
#[derive(Debug, Default)]
pub struct TranscriptStore {
    records: Vec<Transcript>,
    by_key: BTreeMap<String, Vec<usize>>,
}

impl TranscriptStore {
    pub fn load(path: &Path) -> std::io::Result<TranscriptStore> {
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Transcript = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            records.push(record);
        }
        Ok(TranscriptStore::from_records(records))
    }

    pub fn from_records(records: Vec<Transcript>) -> TranscriptStore {
        let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, record) in records.iter().enumerate() {
            by_key.entry(record.key.clone()).or_default().push(i);
        }
        TranscriptStore { records, by_key }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn nth_for_key(&self, key: &str, n: usize) -> Option<&Transcript> {
        self.by_key
            .get(key)
            .and_then(|idxs| idxs.get(n))
            .map(|&i| &self.records[i])
    }
}

/// Replays recorded responses; repetitions with identical requests are
/// served in recorded order. Unknown keys fail with
/// [`ProviderError::ReplayMiss`], never a fabricated answer.
pub struct ReplayProvider {
    id: String,
    store: TranscriptStore,
    cursors: Mutex<BTreeMap<String, usize>>,
}

impl ReplayProvider {
    pub fn new(provider_id: impl Into<String>, store: TranscriptStore) -> ReplayProvider {
        ReplayProvider {
            id: provider_id.into(),
            store,
            cursors: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn from_file(
        provider_id: impl Into<String>,
        path: &Path,
    ) -> std::io::Result<ReplayProvider> {
        Ok(ReplayProvider::new(
            provider_id,
            TranscriptStore::load(path)?,
        ))
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, messages: &[Message], _max: u32) -> Result<ChatResponse, ProviderError> {
        let key = request_key(&self.id, messages);
        let mut cursors = self.cursors.lock().expect("cursor lock poisoned");
        let n = cursors.entry(key.clone()).or_insert(0);
        match self.store.nth_for_key(&key, *n) {
            Some(record) => {
                *n += 1;
                Ok(ChatResponse {
                    content: record.response.clone(),
                    wall_clock_s: record.wall_clock_s,
                })
            }
            None => Err(ProviderError::ReplayMiss { key }),
        }
    }
}

/// Wraps a provider and appends every exchange to a JSONL transcript file.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    file: Mutex<std::fs::File>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn create(inner: P, path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)?;
        Ok(RecordingProvider {
            inner,
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, messages: &[Message], max: u32) -> Result<ChatResponse, ProviderError> {
        let response = self.inner.complete(messages, max)?;
        let record = Transcript {
            key: request_key(self.inner.id(), messages),
            request_messages: messages.to_vec(),
            response: response.content.clone(),
            wall_clock_s: response.wall_clock_s,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| ProviderError::Transport(format!("failed to encode transcript: {e}")))?;
        let mut file = self.file.lock().expect("transcript file lock poisoned");
        writeln!(file, "{line}").map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(response)
    }
}

/// Canned responses for tests and offline dry-runs; each call consumes the
/// next entry.
pub struct ScriptedProvider {
    id: String,
    script: Mutex<VecDeque<Result<ChatResponse, ProviderError>>>,
}

impl ScriptedProvider {
    pub fn new(
        id: impl Into<String>,
        script: Vec<Result<ChatResponse, ProviderError>>,
    ) -> ScriptedProvider {
        ScriptedProvider {
            id: id.into(),
            script: Mutex::new(script.into_iter().collect()),
        }
    }

    /// Provider answering every request with the same content and timing.
    pub fn repeating(
        id: impl Into<String>,
        content: impl Into<String>,
        wall_clock_s: f64,
        times: usize,
    ) -> ScriptedProvider {
        let content = content.into();
        ScriptedProvider::new(
            id,
            (0..times)
                .map(|_| {
                    Ok(ChatResponse {
                        content: content.clone(),
                        wall_clock_s,
                    })
                })
                .collect(),
        )
    }
}

impl ChatProvider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _messages: &[Message], _max: u32) -> Result<ChatResponse, ProviderError> {
        self.script
            .lock()
            .expect("script lock poisoned")
            .pop_front()
            .unwrap_or(Err(ProviderError::ScriptExhausted))
    }
}

/// Generic HTTP chat-completion client (OpenAI-compatible request shape).
/// Credentials come from the environment variable named in the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

fn default_api_key_env() -> String {
    "COEVOLVE_API_KEY".to_string()
}

pub struct HttpChatProvider {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpChatProvider {
    pub fn new(config: HttpProviderConfig) -> HttpChatProvider {
        HttpChatProvider {
            config,
            client: reqwest::blocking::Client::new(),
        }
    }
}

/// Request body in the OpenAI chat-completion shape.
pub fn build_chat_request(model: &str, messages: &[Message], max_tokens: u32) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": messages
            .iter()
            .map(|m| {
                serde_json::json!({
                    "role": match m.role { Role::User => "user", Role::Assistant => "assistant" },
                    "content": m.content,
                })
            })
            .collect::<Vec<_>>(),
        "max_tokens": max_tokens,
    })
}

impl ChatProvider for HttpChatProvider {
    fn id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, messages: &[Message], max: u32) -> Result<ChatResponse, ProviderError> {
        let api_key = std::env::var(&self.config.api_key_env).map_err(|_| {
            ProviderError::Auth(format!(
                "environment variable {} not set",
                self.config.api_key_env
            ))
        })?;
        let body = build_chat_request(&self.config.model, messages, max);
        let started = Instant::now();
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::Auth(format!("status {status}")));
        }
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Err(ProviderError::Api {
                status: status.as_u16(),
                message,
            });
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let wall_clock_s = started.elapsed().as_secs_f64();
        let choice = &value["choices"][0];
        let content = choice["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string();
        // Truncated-but-present output is kept as-is; only an empty
        // over-budget response is an error.
        if content.is_empty() && choice["finish_reason"].as_str() == Some("length") {
            return Err(ProviderError::TokenBudgetExceeded);
        }
        Ok(ChatResponse {
            content,
            wall_clock_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const G_OLD: &str = "A: 'a';\n";
    const G_NEW: &str = "A: 'b';\n";
    const INSTANCE: &str = "a\n";

    #[test]
    fn default_prompt_matches_the_published_text() {
        let config = PromptConfig::default();
        assert!(config
            .final_prompt
            .starts_with("grammar_1 is the initial grammar of the DSL."));
        assert!(config
            .final_prompt
            .ends_with("(white space, indents, tabs, empty lines, etc.)."));
        assert!(config.final_prompt.contains("please do not instantiate it"));
        assert_eq!(config.max_output_tokens, 64000);
    }

    #[test]
    fn session_message_order_and_fidelity() {
        let provider = ScriptedProvider::repeating("test", "b\n", 1.5, 1);
        let config = PromptConfig::default();
        let session = run_migration(G_OLD, G_NEW, INSTANCE, &config, &provider).unwrap();
        assert_eq!(session.messages.len(), 5);
        assert!(session.messages[..4].iter().all(|m| m.role == Role::User));
        assert_eq!(session.messages[4].role, Role::Assistant);
        assert!(session.messages[0].content.contains("Grammar 1"));
        assert!(session.messages[0].content.contains(G_OLD));
        assert!(session.messages[1].content.contains("Grammar 2"));
        assert!(session.messages[1].content.contains(G_NEW));
        assert!(session.messages[2].content.contains("Instance 1"));
        assert!(session.messages[2].content.contains(INSTANCE));
        assert_eq!(session.messages[3].content, config.final_prompt);
        assert_eq!(session.output, "b\n");
        assert!((session.wall_clock_s - 1.5).abs() < 1e-12);
        assert_eq!(session.outcome, SessionOutcome::Completed);
    }

    #[test]
    fn code_fences_are_stripped_and_nothing_else() {
        assert_eq!(strip_code_fences("```\nfoo\nbar\n```"), "foo\nbar\n");
        assert_eq!(strip_code_fences("```dsl\nfoo\n```\n"), "foo\n");
        assert_eq!(strip_code_fences("plain text\n"), "plain text\n");
        assert_eq!(strip_code_fences("``` incomplete"), "``` incomplete");
        // Interior fences stay put.
        assert_eq!(strip_code_fences("a\n```\nb\n```\nc"), "a\n```\nb\n```\nc");
    }

    #[test]
    fn empty_response_is_an_outcome_not_an_error() {
        let provider = ScriptedProvider::repeating("test", "", 0.4, 1);
        let session =
            run_migration(G_OLD, G_NEW, INSTANCE, &PromptConfig::default(), &provider).unwrap();
        assert_eq!(session.outcome, SessionOutcome::EmptyResponse);
        assert_eq!(session.output, "");
    }

    #[test]
    fn repetitions_send_identical_request_sequences() {
        let provider = ScriptedProvider::repeating("test", "out\n", 0.1, 3);
        let sessions = run_repetitions(
            G_OLD,
            G_NEW,
            INSTANCE,
            &PromptConfig::default(),
            &provider,
            3,
            |_, _| {},
        );
        let requests: Vec<Vec<Message>> = sessions
            .iter()
            .map(|s| s.as_ref().unwrap().messages[..4].to_vec())
            .collect();
        assert_eq!(requests[0], requests[1]);
        assert_eq!(requests[1], requests[2]);
    }

    #[test]
    fn failed_repetition_does_not_abort_the_rest() {
        let provider = ScriptedProvider::new(
            "test",
            vec![
                Ok(ChatResponse {
                    content: "one\n".into(),
                    wall_clock_s: 0.1,
                }),
                Err(ProviderError::Transport("boom".into())),
                Ok(ChatResponse {
                    content: "three\n".into(),
                    wall_clock_s: 0.1,
                }),
            ],
        );
        let mut seen = Vec::new();
        let sessions = run_repetitions(
            G_OLD,
            G_NEW,
            INSTANCE,
            &PromptConfig::default(),
            &provider,
            3,
            |run, result| seen.push((run, result.is_ok())),
        );
        assert_eq!(seen, vec![(0, true), (1, false), (2, true)]);
        assert_eq!(sessions.iter().filter(|s| s.is_ok()).count(), 2);
    }

    #[test]
    fn record_then_replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcripts.jsonl");
        let config = PromptConfig::default();
        {
            let scripted = ScriptedProvider::new(
                "model-x",
                vec![
                    Ok(ChatResponse {
                        content: "first\n".into(),
                        wall_clock_s: 34.74,
                    }),
                    Ok(ChatResponse {
                        content: "second\n".into(),
                        wall_clock_s: 12.5,
                    }),
                ],
            );
            let recording = RecordingProvider::create(scripted, &path).unwrap();
            run_migration(G_OLD, G_NEW, INSTANCE, &config, &recording).unwrap();
            run_migration(G_OLD, G_NEW, INSTANCE, &config, &recording).unwrap();
        }
        let replay = ReplayProvider::from_file("model-x", &path).unwrap();
        let one = run_migration(G_OLD, G_NEW, INSTANCE, &config, &replay).unwrap();
        let two = run_migration(G_OLD, G_NEW, INSTANCE, &config, &replay).unwrap();
        assert_eq!(one.output, "first\n");
        assert!((one.wall_clock_s - 34.74).abs() < 1e-12);
        assert_eq!(two.output, "second\n");
        let miss = run_migration(G_OLD, G_NEW, INSTANCE, &config, &replay);
        assert!(matches!(
            miss,
            Err(MigrateError::Provider(ProviderError::ReplayMiss { .. }))
        ));
    }

    #[test]
    fn replay_of_a_different_request_misses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcripts.jsonl");
        let config = PromptConfig::default();
        let scripted = ScriptedProvider::repeating("model-x", "out\n", 0.2, 1);
        let recording = RecordingProvider::create(scripted, &path).unwrap();
        run_migration(G_OLD, G_NEW, INSTANCE, &config, &recording).unwrap();
        let replay = ReplayProvider::from_file("model-x", &path).unwrap();
        let miss = run_migration(G_OLD, G_NEW, "different instance\n", &config, &replay);
        assert!(matches!(
            miss,
            Err(MigrateError::Provider(ProviderError::ReplayMiss { .. }))
        ));
    }

    #[test]
    fn request_keys_separate_providers_and_contents() {
        let messages = PromptConfig::default().request_messages(G_OLD, G_NEW, INSTANCE);
        let a = request_key("model-a", &messages);
        let b = request_key("model-b", &messages);
        assert_ne!(a, b);
        let other = PromptConfig::default().request_messages(G_OLD, G_NEW, "x\n");
        assert_ne!(a, request_key("model-a", &other));
        assert_eq!(a, request_key("model-a", &messages));
    }

    #[test]
    fn http_request_body_shape() {
        let messages = vec![Message::user("hello")];
        let body = build_chat_request("m1", &messages, 64000);
        assert_eq!(body["model"], "m1");
        assert_eq!(body["max_tokens"], 64000);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hello");
    }
}
