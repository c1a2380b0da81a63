//! Standard chess rules for the match harness.
//!
//! Positions are plain values: [`apply_move`] returns a new [`BoardState`] and
//! never touches its input, so any number of games can share this crate
//! without synchronization. Legal moves are returned sorted by UCI text so
//! that transcripts built from them are reproducible.

mod board;
mod fen;
mod movegen;
mod moves;
mod render;
mod status;
mod types;

pub use board::{BoardState, CastlingRights};
pub use fen::{parse_fen, render_fen, render_placement, FenError, STARTING_FEN};
pub use movegen::{apply_move, apply_uci, in_check, is_attacked, is_legal, legal_moves, perft, IllegalMove};
pub use moves::{MoveParseError, MoveUci};
pub use render::{render_board, BoardStyle, EMPTY_GLYPH};
pub use status::{
    game_status, is_insufficient_material, GameStatus, PositionHistory, PositionKey, FIVEFOLD_COUNT,
    SEVENTYFIVE_MOVE_PLIES,
};
pub use types::{Color, Piece, PieceKind, Square};
