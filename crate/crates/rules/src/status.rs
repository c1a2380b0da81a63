use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::board::{BoardState, CastlingRights};
use crate::movegen::{in_check, legal_moves};
use crate::types::{Color, Piece, PieceKind, Square};

/// Halfmove clock value at which the seventy-five-move rule ends the game.
pub const SEVENTYFIVE_MOVE_PLIES: u32 = 150;
/// Occurrences of one position that end the game.
pub const FIVEFOLD_COUNT: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum GameStatus {
    Ongoing,
    Checkmate { winner: Color },
    Stalemate,
    InsufficientMaterial,
    SeventyfiveMoves,
    FivefoldRepetition,
}

impl GameStatus {
    pub fn is_over(&self) -> bool {
        !matches!(self, GameStatus::Ongoing)
    }
}

/// Identity of a position for repetition purposes: placement, side to move,
/// castling rights and the (canonical) en-passant square.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositionKey {
    squares: [Option<Piece>; 64],
    side_to_move: Color,
    castling: CastlingRights,
    en_passant: Option<Square>,
}

impl From<&BoardState> for PositionKey {
    fn from(b: &BoardState) -> Self {
        PositionKey {
            squares: b.squares,
            side_to_move: b.side_to_move,
            castling: b.castling,
            en_passant: b.en_passant,
        }
    }
}

/// Multiset of positions seen since the game started.
#[derive(Debug, Clone, Default)]
pub struct PositionHistory {
    seen: HashMap<PositionKey, u32>,
}

impl PositionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// History seeded with the initial position of a game.
    pub fn starting_from(board: &BoardState) -> Self {
        let mut h = Self::new();
        h.push(board);
        h
    }

    pub fn push(&mut self, board: &BoardState) {
        *self.seen.entry(PositionKey::from(board)).or_insert(0) += 1;
    }

    pub fn count(&self, board: &BoardState) -> u32 {
        self.seen.get(&PositionKey::from(board)).copied().unwrap_or(0)
    }
}

/// Neither side can possibly deliver mate: no pawns, rooks or queens, and at
/// most one minor piece in total or only bishops all on one square color.
pub fn is_insufficient_material(board: &BoardState) -> bool {
    let mut minors = 0;
    let mut knights = 0;
    let mut bishop_colors = [false; 2];
    for (sq, p) in board.pieces() {
        match p.kind {
            PieceKind::King => {}
            PieceKind::Pawn | PieceKind::Rook | PieceKind::Queen => return false,
            PieceKind::Knight => {
                minors += 1;
                knights += 1;
            }
            PieceKind::Bishop => {
                minors += 1;
                bishop_colors[sq.is_light() as usize] = true;
            }
        }
    }
    minors <= 1 || (knights == 0 && !(bishop_colors[0] && bishop_colors[1]))
}

pub fn game_status(board: &BoardState, history: &PositionHistory) -> GameStatus {
    let has_moves = !legal_moves(board).is_empty();
    if !has_moves && in_check(board, board.side_to_move) {
        return GameStatus::Checkmate { winner: board.side_to_move.opposite() };
    }
    if is_insufficient_material(board) {
        return GameStatus::InsufficientMaterial;
    }
    if !has_moves {
        return GameStatus::Stalemate;
    }
    if board.halfmove_clock >= SEVENTYFIVE_MOVE_PLIES {
        return GameStatus::SeventyfiveMoves;
    }
    if history.count(board) >= FIVEFOLD_COUNT {
        return GameStatus::FivefoldRepetition;
    }
    GameStatus::Ongoing
}
