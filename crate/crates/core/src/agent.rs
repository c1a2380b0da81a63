//! Types shared by everything that produces replies or moves.

use std::fmt;

use agentchess_rules::{BoardState, MoveUci};
use serde::{Deserialize, Serialize};

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

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Token counts as reported by the endpoint, never normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReply {
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl AgentReply {
    pub fn text(content: impl Into<String>) -> Self {
        AgentReply { content: content.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelErrorKind {
    Timeout,
    Transport,
    Malformed,
    Engine,
    Config,
}

impl fmt::Display for ModelErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelErrorKind::Timeout => "timeout",
            ModelErrorKind::Transport => "transport",
            ModelErrorKind::Malformed => "malformed",
            ModelErrorKind::Engine => "engine",
            ModelErrorKind::Config => "config",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct ModelError {
    pub kind: ModelErrorKind,
    pub message: String,
}

impl ModelError {
    pub fn new(kind: ModelErrorKind, message: impl Into<String>) -> Self {
        ModelError { kind, message: message.into() }
    }
}

/// Something that answers a chat transcript: an endpoint, an ensemble, or a
/// scripted stand-in.
pub trait DialogAgent: Send {
    fn reply(&mut self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError>;

    /// Short identifier stored in logs.
    fn label(&self) -> String {
        "agent".to_string()
    }
}

/// Something that picks a move directly from the position.
pub trait MovePlayer: Send {
    fn choose_move(&mut self, board: &BoardState, played: &[MoveUci]) -> Result<MoveUci, ModelError>;

    fn label(&self) -> String {
        "player".to_string()
    }
}

impl<T: DialogAgent + ?Sized> DialogAgent for Box<T> {
    fn reply(&mut self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        (**self).reply(messages)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}
