//! Migration backends: the chat-session protocol with record/replay, and the
//! deterministic rule-based editor.

pub mod llm;
pub mod rules;
