//! Move and reply providers, and the serializable specs that build them.

pub mod engine;
pub mod llm;
pub mod moa;
pub mod random;
pub mod scripted;

use agentchess_rules::Color;
use serde::{Deserialize, Serialize};

use crate::agent::{DialogAgent, ModelError, ModelErrorKind, MovePlayer};
use engine::{EngineConfig, EnginePlayer};
use llm::{ChatClient, LlmEndpointConfig};
use moa::{MoaConfig, MoaPlayer};
use random::{RandomPlayer, SeededRng};
use scripted::{BotPick, FirstMovePlayer, ProtocolBot, ScriptedMoves, ScriptedReplies, ScriptedReply};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlayerSpec {
    Random,
    FirstMove,
    Engine(EngineConfig),
    ScriptedMoves {
        moves: Vec<String>,
    },
    Llm(LlmEndpointConfig),
    Moa(MoaConfig),
    ScriptedReplies {
        replies: Vec<ScriptedReply>,
    },
    ProtocolBot {
        #[serde(default)]
        pick: BotPick,
        #[serde(default)]
        delay_ms: u64,
    },
}

pub enum SidePlayer {
    Moves(Box<dyn MovePlayer>),
    Dialog(Box<dyn DialogAgent>),
}

impl SidePlayer {
    pub fn label(&self) -> String {
        match self {
            SidePlayer::Moves(p) => p.label(),
            SidePlayer::Dialog(a) => a.label(),
        }
    }
}

impl PlayerSpec {
    /// Whether this player speaks the dialog protocol.
    pub fn is_dialog(&self) -> bool {
        matches!(
            self,
            PlayerSpec::Llm(_) | PlayerSpec::Moa(_) | PlayerSpec::ScriptedReplies { .. } | PlayerSpec::ProtocolBot { .. }
        )
    }

    pub fn engine_skill(&self) -> Option<u32> {
        match self {
            PlayerSpec::Engine(e) => e.skill,
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PlayerSpec::Random => "random".into(),
            PlayerSpec::FirstMove => "first-move".into(),
            PlayerSpec::Engine(e) => match e.skill {
                Some(s) => format!("engine(skill {s})"),
                None => "engine".into(),
            },
            PlayerSpec::ScriptedMoves { .. } => "scripted-moves".into(),
            PlayerSpec::Llm(c) => c.display_name(),
            PlayerSpec::Moa(m) => format!("moa({}x, {})", m.proposers.len(), m.synthesizer.display_name()),
            PlayerSpec::ScriptedReplies { .. } => "scripted".into(),
            PlayerSpec::ProtocolBot { .. } => "protocol-bot".into(),
        }
    }

    /// Cheap checks that need no process or network: executables exist,
    /// endpoint settings are sane.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            PlayerSpec::Engine(e) if !e.path.is_file() => {
                Err(ModelError::new(ModelErrorKind::Config, format!("engine not found: {}", e.path.display())))
            }
            PlayerSpec::Llm(c) => c.validate(),
            PlayerSpec::Moa(m) if m.proposers.is_empty() => {
                Err(ModelError::new(ModelErrorKind::Config, "mixture of agents needs at least one proposer"))
            }
            PlayerSpec::Moa(m) => m.proposers.iter().chain([&m.synthesizer]).try_for_each(|c| c.validate()),
            _ => Ok(()),
        }
    }

    pub fn build(&self, color: Color, seed: u64) -> Result<SidePlayer, ModelError> {
        Ok(match self {
            PlayerSpec::Random => SidePlayer::Moves(Box::new(RandomPlayer::new(SeededRng::for_side(seed, color, 0)))),
            PlayerSpec::FirstMove => SidePlayer::Moves(Box::new(FirstMovePlayer)),
            PlayerSpec::Engine(cfg) => SidePlayer::Moves(Box::new(EnginePlayer::start(cfg)?)),
            PlayerSpec::ScriptedMoves { moves } => SidePlayer::Moves(Box::new(ScriptedMoves::new(moves.clone()))),
            PlayerSpec::Llm(cfg) => SidePlayer::Dialog(Box::new(ChatClient::new(cfg.clone())?)),
            PlayerSpec::Moa(cfg) => SidePlayer::Dialog(Box::new(MoaPlayer::from_config(cfg)?)),
            PlayerSpec::ScriptedReplies { replies } => {
                SidePlayer::Dialog(Box::new(ScriptedReplies::new(replies.clone())))
            }
            PlayerSpec::ProtocolBot { pick, delay_ms } => {
                SidePlayer::Dialog(Box::new(ProtocolBot::new(*pick, seed, color, *delay_ms)))
            }
        })
    }
}
