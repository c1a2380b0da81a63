//! The bounded per-ply conversation between the harness and a dialog agent.
//!
//! Each ply starts from a fresh transcript holding the game loop prompt. The
//! agent answers with one of three actions. Queries consume a turn; an
//! unparsable reply or an illegal move is a failed attempt within the current
//! turn and gets a reflection prompt instead.

use std::ops::AddAssign;

use agentchess_rules::{apply_uci, legal_moves, render_board, BoardState, BoardStyle, Color, MoveUci};
use serde::{Deserialize, Serialize};

use crate::agent::{ChatMessage, DialogAgent, ModelError, TokenUsage};

pub const GET_CURRENT_BOARD: &str = "get_current_board";
pub const GET_LEGAL_MOVES: &str = "get_legal_moves";
pub const MAKE_MOVE: &str = "make_move";

pub const INVALID_ACTION_PROMPT: &str = include_str!("../prompts/invalid_action.txt");
pub const MOVE_MADE_REPLY: &str = include_str!("../prompts/move_made.txt");

const INTRO: &str = "Now is your turn to make a move. Before making a move you can pick one of the following actions:";
const BOARD_LINE: &str = "- 'get_current_board' to get the schema and current status of the board";
const LEGAL_LINE: &str = "- 'get_legal_moves' to get a UCI formatted list of available moves";
const MOVE_LINE: &str =
    "- 'make_move <UCI formatted move>' when you are ready to complete your turn (e.g., 'make_move e2e4')";
const CLOSING: &str = "Respond with the action.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolConfigError {
    #[error("dialog limit '{0}' must be positive")]
    NonPositiveLimit(&'static str),
    #[error("a variant without query actions must inline both the board and the legal moves")]
    HiddenInformation,
    #[error("unknown protocol variant '{0}'")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DialogLimits {
    pub max_turns_per_ply: u32,
    pub max_attempts_per_turn: u32,
    pub max_full_moves: u32,
}

impl Default for DialogLimits {
    fn default() -> Self {
        DialogLimits { max_turns_per_ply: 10, max_attempts_per_turn: 3, max_full_moves: 100 }
    }
}

impl DialogLimits {
    pub fn validate(&self) -> Result<(), ProtocolConfigError> {
        for (name, v) in [
            ("max_turns_per_ply", self.max_turns_per_ply),
            ("max_attempts_per_turn", self.max_attempts_per_turn),
            ("max_full_moves", self.max_full_moves),
        ] {
            if v == 0 {
                return Err(ProtocolConfigError::NonPositiveLimit(name));
            }
        }
        Ok(())
    }

    pub fn max_plys(&self) -> u32 {
        self.max_full_moves * 2
    }
}

/// Which actions are offered and what is placed directly in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolVariant {
    pub board_style: BoardStyle,
    pub offer_get_board: bool,
    pub offer_get_legal_moves: bool,
    pub inline_board: bool,
    pub inline_legal_moves: bool,
    pub include_move_history: bool,
}

impl Default for ProtocolVariant {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Names accepted by [`ProtocolVariant::preset`].
pub const VARIANT_PRESETS: &[&str] = &[
    "baseline",
    "always_board_state",
    "always_legal_moves",
    "only_make_move",
    "ascii_board",
    "fen_board",
    "no_legal_moves",
    "previous_moves",
    "previous_moves_only_make_move",
];

impl ProtocolVariant {
    pub fn baseline() -> Self {
        ProtocolVariant {
            board_style: BoardStyle::Unicode,
            offer_get_board: true,
            offer_get_legal_moves: true,
            inline_board: false,
            inline_legal_moves: false,
            include_move_history: false,
        }
    }

    pub fn only_make_move() -> Self {
        ProtocolVariant {
            offer_get_board: false,
            offer_get_legal_moves: false,
            inline_board: true,
            inline_legal_moves: true,
            ..Self::baseline()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ProtocolConfigError> {
        let base = Self::baseline();
        Ok(match name {
            "baseline" => base,
            "always_board_state" => ProtocolVariant { offer_get_board: false, inline_board: true, ..base },
            "always_legal_moves" => ProtocolVariant { offer_get_legal_moves: false, inline_legal_moves: true, ..base },
            "only_make_move" => Self::only_make_move(),
            "ascii_board" => ProtocolVariant { board_style: BoardStyle::Ascii, ..base },
            "fen_board" => ProtocolVariant { board_style: BoardStyle::Fen, ..base },
            "no_legal_moves" => ProtocolVariant { board_style: BoardStyle::Fen, offer_get_legal_moves: false, ..base },
            "previous_moves" => ProtocolVariant { include_move_history: true, ..base },
            "previous_moves_only_make_move" => ProtocolVariant { include_move_history: true, ..Self::only_make_move() },
            other => return Err(ProtocolConfigError::UnknownVariant(other.to_string())),
        })
    }

    pub fn validate(&self) -> Result<(), ProtocolConfigError> {
        if !self.offer_get_board && !self.offer_get_legal_moves && !(self.inline_board && self.inline_legal_moves) {
            return Err(ProtocolConfigError::HiddenInformation);
        }
        Ok(())
    }

    fn offered(&self) -> Vec<&'static str> {
        let mut v = Vec::with_capacity(3);
        if self.offer_get_board {
            v.push(GET_CURRENT_BOARD);
        }
        if self.offer_get_legal_moves {
            v.push(GET_LEGAL_MOVES);
        }
        v.push(MAKE_MOVE);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action", content = "argument")]
pub enum Action {
    GetCurrentBoard,
    GetLegalMoves,
    MakeMove(String),
}

/// "1. e2e4 e7e5, 2. g1f3" numbering, white ply first.
pub fn format_move_history(moves: &[MoveUci]) -> String {
    moves
        .chunks(2)
        .enumerate()
        .map(|(i, pair)| {
            let plies: Vec<String> = pair.iter().map(|m| m.to_string()).collect();
            format!("{}. {}", i + 1, plies.join(" "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_legal_moves(board: &BoardState) -> String {
    legal_moves(board).iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn build_game_loop_prompt(color: Color, variant: &ProtocolVariant, board: &BoardState, history: &[MoveUci]) -> String {
    let mut out = String::new();
    if variant.include_move_history && !history.is_empty() {
        out.push_str("Previous moves (UCI): ");
        out.push_str(&format_move_history(history));
        out.push_str("\n\n");
    }
    out.push_str(&format!("You are a professional chess player and you play as {}. {INTRO}\n", color.name()));
    if variant.offer_get_board {
        out.push_str(BOARD_LINE);
        out.push('\n');
    }
    if variant.offer_get_legal_moves {
        out.push_str(LEGAL_LINE);
        out.push('\n');
    }
    out.push_str(MOVE_LINE);
    out.push('\n');
    if variant.inline_board {
        out.push_str("Current board:\n");
        out.push_str(&render_board(board, variant.board_style));
        out.push('\n');
    }
    if variant.inline_legal_moves {
        out.push_str("Legal moves: ");
        out.push_str(&format_legal_moves(board));
        out.push('\n');
    }
    out.push_str(CLOSING);
    out
}

pub fn invalid_action_prompt(variant: &ProtocolVariant) -> String {
    if variant.offer_get_board && variant.offer_get_legal_moves {
        return INVALID_ACTION_PROMPT.to_string();
    }
    let names: Vec<String> = variant
        .offered()
        .into_iter()
        .map(|a| if a == MAKE_MOVE { format!("{MAKE_MOVE} <UCI formatted move>") } else { a.to_string() })
        .collect();
    format!("Invalid action. Pick one, reply exactly with the name and space delimitted argument: {}", names.join(", "))
}

/// Drops `<think>...</think>` sections. An unterminated section swallows the
/// rest of the text.
pub fn strip_thinking(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Finds the first offered action keyword in the reply. The make_move
/// argument is the next whitespace-delimited token with surrounding
/// punctuation removed; it must be non-empty and alphanumeric.
pub fn parse_action(reply: &str, variant: &ProtocolVariant) -> Option<Action> {
    let (pos, name) = variant
        .offered()
        .into_iter()
        .filter_map(|name| reply.find(name).map(|pos| (pos, name)))
        .min_by_key(|(pos, _)| *pos)?;
    match name {
        GET_CURRENT_BOARD => Some(Action::GetCurrentBoard),
        GET_LEGAL_MOVES => Some(Action::GetLegalMoves),
        _ => {
            let rest = &reply[pos + MAKE_MOVE.len()..];
            let token = rest.split_whitespace().next()?;
            let arg = token.trim_matches(|c: char| !c.is_ascii_alphanumeric());
            if arg.is_empty() || !arg.chars().all(|c| c.is_ascii_alphanumeric()) {
                return None;
            }
            Some(Action::MakeMove(arg.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionResponse {
    pub text: String,
    pub applied: Option<(MoveUci, BoardState)>,
}

pub fn respond_to_action(action: &Action, board: &BoardState, variant: &ProtocolVariant) -> ActionResponse {
    match action {
        Action::GetCurrentBoard => ActionResponse { text: render_board(board, variant.board_style), applied: None },
        Action::GetLegalMoves => ActionResponse { text: format_legal_moves(board), applied: None },
        Action::MakeMove(uci) => match apply_uci(board, uci) {
            Ok(applied) => ActionResponse { text: MOVE_MADE_REPLY.to_string(), applied: Some(applied) },
            Err(e) => ActionResponse { text: format!("Failed to make move: {e}"), applied: None },
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReplyOutcome {
    BoardQuery,
    LegalMovesQuery,
    MoveMade { uci: MoveUci },
    IllegalMove { uci: String },
    Unparsable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    pub outcome: ReplyOutcome,
    pub response: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlyCounts {
    pub turns_used: u32,
    pub failed_attempts: u32,
    pub board_queries: u32,
    pub legal_move_queries: u32,
    pub illegal_move_attempts: u32,
    pub unparsable_replies: u32,
}

impl AddAssign for PlyCounts {
    fn add_assign(&mut self, o: Self) {
        self.turns_used += o.turns_used;
        self.failed_attempts += o.failed_attempts;
        self.board_queries += o.board_queries;
        self.legal_move_queries += o.legal_move_queries;
        self.illegal_move_attempts += o.illegal_move_attempts;
        self.unparsable_replies += o.unparsable_replies;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum PlyOutcome {
    MoveMade { uci: MoveUci },
    TooManyWrongActions,
    MaxTurns,
    ModelError { error: ModelError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlyTranscript {
    pub prompt: String,
    pub exchanges: Vec<Exchange>,
    pub counts: PlyCounts,
    /// Failed attempts recorded in each turn, including an unfinished last turn.
    pub attempts_per_turn: Vec<u32>,
    pub outcome: PlyOutcome,
}

impl PlyTranscript {
    /// The conversation as the agent saw it, followed by the final harness
    /// response.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut v = vec![ChatMessage::user(self.prompt.clone())];
        for e in &self.exchanges {
            v.push(ChatMessage::assistant(e.reply.clone()));
            v.push(ChatMessage::user(e.response.clone()));
        }
        v
    }

    pub fn tokens(&self) -> TokenUsage {
        let mut total = TokenUsage::default();
        let add = |acc: &mut Option<u64>, v: Option<u64>| {
            if let Some(v) = v {
                *acc = Some(acc.unwrap_or(0) + v);
            }
        };
        for u in self.exchanges.iter().filter_map(|e| e.usage) {
            add(&mut total.prompt_tokens, u.prompt_tokens);
            add(&mut total.completion_tokens, u.completion_tokens);
            add(&mut total.reasoning_tokens, u.reasoning_tokens);
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct PlyResult {
    pub transcript: PlyTranscript,
    pub applied: Option<(MoveUci, BoardState)>,
}

pub fn run_ply(
    board: &BoardState,
    color: Color,
    history: &[MoveUci],
    agent: &mut dyn DialogAgent,
    limits: &DialogLimits,
    variant: &ProtocolVariant,
) -> PlyResult {
    let prompt = build_game_loop_prompt(color, variant, board, history);
    let mut messages = vec![ChatMessage::user(prompt.clone())];
    let mut exchanges = Vec::new();
    let mut counts = PlyCounts::default();
    let mut attempts_per_turn = Vec::new();
    let mut attempts = 0u32;
    let mut applied = None;

    let outcome = loop {
        if counts.turns_used >= limits.max_turns_per_ply {
            break PlyOutcome::MaxTurns;
        }
        let reply = match agent.reply(&messages) {
            Ok(r) => r,
            Err(error) => {
                if attempts > 0 {
                    attempts_per_turn.push(attempts);
                }
                break PlyOutcome::ModelError { error };
            }
        };
        let parsed = parse_action(&strip_thinking(&reply.content), variant);
        let (outcome, response, turn_done) = match &parsed {
            None => {
                counts.unparsable_replies += 1;
                (ReplyOutcome::Unparsable, invalid_action_prompt(variant), false)
            }
            Some(action) => {
                let r = respond_to_action(action, board, variant);
                let outcome = match (action, &r.applied) {
                    (Action::GetCurrentBoard, _) => {
                        counts.board_queries += 1;
                        ReplyOutcome::BoardQuery
                    }
                    (Action::GetLegalMoves, _) => {
                        counts.legal_move_queries += 1;
                        ReplyOutcome::LegalMovesQuery
                    }
                    (Action::MakeMove(_), Some((m, _))) => ReplyOutcome::MoveMade { uci: *m },
                    (Action::MakeMove(uci), None) => {
                        counts.illegal_move_attempts += 1;
                        ReplyOutcome::IllegalMove { uci: uci.clone() }
                    }
                };
                let done = !matches!(outcome, ReplyOutcome::IllegalMove { .. });
                applied = r.applied;
                (outcome, r.text, done)
            }
        };
        messages.push(ChatMessage::assistant(reply.content.clone()));
        messages.push(ChatMessage::user(response.clone()));
        let made = match &outcome {
            ReplyOutcome::MoveMade { uci } => Some(*uci),
            _ => None,
        };
        exchanges.push(Exchange { reply: reply.content, reasoning: reply.reasoning, usage: reply.usage, outcome, response });

        if turn_done {
            counts.turns_used += 1;
            attempts_per_turn.push(attempts);
            attempts = 0;
            if let Some(uci) = made {
                break PlyOutcome::MoveMade { uci };
            }
        } else {
            counts.failed_attempts += 1;
            attempts += 1;
            if attempts >= limits.max_attempts_per_turn {
                attempts_per_turn.push(attempts);
                break PlyOutcome::TooManyWrongActions;
            }
        }
    };

    PlyResult { transcript: PlyTranscript { prompt, exchanges, counts, attempts_per_turn, outcome }, applied }
}
