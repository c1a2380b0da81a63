//! Deterministic stand-ins for endpoints and opponents.

use std::thread;
use std::time::Duration;

use agentchess_rules::{legal_moves, parse_fen, BoardState, Color, MoveUci};
use serde::{Deserialize, Serialize};

use crate::agent::{AgentReply, ChatMessage, DialogAgent, ModelError, ModelErrorKind, MovePlayer, Role};
use crate::dialog::{GET_CURRENT_BOARD, GET_LEGAL_MOVES};
use crate::players::random::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Error { error: ModelErrorKind },
}

/// Replays a fixed list of replies, wrapping around at the end.
pub struct ScriptedReplies {
    replies: Vec<ScriptedReply>,
    next: usize,
}

impl ScriptedReplies {
    pub fn new(replies: Vec<ScriptedReply>) -> Self {
        ScriptedReplies { replies, next: 0 }
    }

    pub fn texts<S: AsRef<str>>(texts: &[S]) -> Self {
        Self::new(texts.iter().map(|t| ScriptedReply::Text(t.as_ref().to_string())).collect())
    }

    pub fn calls(&self) -> usize {
        self.next
    }
}

impl DialogAgent for ScriptedReplies {
    fn reply(&mut self, _: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        if self.replies.is_empty() {
            return Err(ModelError::new(ModelErrorKind::Config, "empty reply script"));
        }
        let r = self.replies[self.next % self.replies.len()].clone();
        self.next += 1;
        match r {
            ScriptedReply::Text(t) => Ok(AgentReply::text(t)),
            ScriptedReply::Error { error } => Err(ModelError::new(error, "scripted failure")),
        }
    }

    fn label(&self) -> String {
        "scripted".to_string()
    }
}

/// Plays a fixed move list; running out of moves is an error.
pub struct ScriptedMoves {
    moves: Vec<String>,
    next: usize,
}

impl ScriptedMoves {
    pub fn new(moves: Vec<String>) -> Self {
        ScriptedMoves { moves, next: 0 }
    }
}

impl MovePlayer for ScriptedMoves {
    fn choose_move(&mut self, _: &BoardState, _: &[MoveUci]) -> Result<MoveUci, ModelError> {
        let text = self
            .moves
            .get(self.next)
            .ok_or_else(|| ModelError::new(ModelErrorKind::Engine, "move script exhausted"))?;
        self.next += 1;
        text.parse().map_err(|_| ModelError::new(ModelErrorKind::Engine, format!("bad scripted move '{text}'")))
    }

    fn label(&self) -> String {
        "scripted-moves".to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BotPick {
    #[default]
    First,
    Random,
}

/// A well-behaved dialog agent: asks for the board, then the legal moves,
/// then plays one of them. Uses inlined information when the prompt carries
/// it, and derives the moves from a FEN board when they cannot be queried.
/// Mainly useful for exercising the full pipeline without an endpoint.
pub struct ProtocolBot {
    pick: BotPick,
    rng: SeededRng,
    delay: Duration,
}

impl ProtocolBot {
    pub fn new(pick: BotPick, seed: u64, color: Color, delay_ms: u64) -> Self {
        ProtocolBot { pick, rng: SeededRng::for_side(seed, color, 1), delay: Duration::from_millis(delay_ms) }
    }
}

fn parse_move_list(text: &str) -> Option<Vec<String>> {
    let moves: Vec<String> = text.split(", ").map(|s| s.trim().to_string()).collect();
    let ok = !moves.is_empty() && moves.iter().all(|m| m.parse::<MoveUci>().is_ok());
    ok.then_some(moves)
}

impl DialogAgent for ProtocolBot {
    fn reply(&mut self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let prompt = &messages.first().ok_or_else(|| ModelError::new(ModelErrorKind::Config, "empty transcript"))?.content;
        let asked = |action: &str| messages.iter().any(|m| m.role == Role::Assistant && m.content == action);

        let mut moves = prompt.lines().find_map(|l| l.strip_prefix("Legal moves: ")).and_then(parse_move_list);
        if moves.is_none() {
            let answered = messages
                .windows(2)
                .rev()
                .find(|w| w[0].role == Role::Assistant && w[0].content == GET_LEGAL_MOVES)
                .map(|w| w[1].content.as_str());
            moves = answered.and_then(parse_move_list);
        }
        if moves.is_none() {
            let board = messages
                .windows(2)
                .rev()
                .find(|w| w[0].role == Role::Assistant && w[0].content == GET_CURRENT_BOARD)
                .and_then(|w| parse_fen(&w[1].content).ok());
            moves = board.map(|b| legal_moves(&b).iter().map(|m| m.to_string()).collect()).filter(|v: &Vec<String>| !v.is_empty());
        }
        let reply = if prompt.contains(&format!("'{GET_CURRENT_BOARD}'")) && !asked(GET_CURRENT_BOARD) {
            GET_CURRENT_BOARD.to_string()
        } else if let Some(moves) = moves {
            let m = match self.pick {
                BotPick::First => &moves[0],
                BotPick::Random => self.rng.choose(&moves).expect("non-empty"),
            };
            format!("make_move {m}")
        } else if prompt.contains(&format!("'{GET_LEGAL_MOVES}'")) {
            GET_LEGAL_MOVES.to_string()
        } else {
            return Err(ModelError::new(ModelErrorKind::Config, "no way to learn the legal moves"));
        };
        Ok(AgentReply::text(reply))
    }

    fn label(&self) -> String {
        "protocol-bot".to_string()
    }
}

/// Opponent that always plays the first legal move in UCI order.
pub struct FirstMovePlayer;

impl MovePlayer for FirstMovePlayer {
    fn choose_move(&mut self, board: &BoardState, _: &[MoveUci]) -> Result<MoveUci, ModelError> {
        legal_moves(board).first().copied().ok_or_else(|| ModelError::new(ModelErrorKind::Engine, "no legal moves"))
    }

    fn label(&self) -> String {
        "first-move".to_string()
    }
}
