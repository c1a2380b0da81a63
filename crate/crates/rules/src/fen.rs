//! Forsyth–Edwards Notation.
//!
//! Rendering is canonical: castling rights without their king and rook on the
//! home squares are dropped, and the en-passant field is emitted only when an
//! en-passant capture is legal.

use thiserror::Error;

use crate::board::{BoardState, CastlingRights};
use crate::movegen::{canonicalize_en_passant, in_check};
use crate::types::{Color, Piece, PieceKind, Square};

pub const STARTING_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FenError {
    #[error("expected 4 or 6 space-separated fields, found {0}")]
    FieldCount(usize),
    #[error("expected 8 ranks, found {0}")]
    RankCount(usize),
    #[error("rank {rank} describes {width} files")]
    RankWidth { rank: u8, width: usize },
    #[error("invalid piece letter '{0}'")]
    InvalidPiece(char),
    #[error("invalid side to move '{0}'")]
    InvalidSideToMove(String),
    #[error("invalid castling field '{0}'")]
    InvalidCastling(String),
    #[error("invalid en-passant field '{0}'")]
    InvalidEnPassant(String),
    #[error("invalid move clock '{0}'")]
    InvalidClock(String),
    #[error("{color} has {count} kings")]
    KingCount { color: Color, count: usize },
    #[error("pawn on the first or last rank")]
    PawnOnBackRank,
    #[error("side not to move is in check")]
    OpponentInCheck,
}

pub fn parse_fen(text: &str) -> Result<BoardState, FenError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 4 && fields.len() != 6 {
        return Err(FenError::FieldCount(fields.len()));
    }

    let ranks: Vec<&str> = fields[0].split('/').collect();
    if ranks.len() != 8 {
        return Err(FenError::RankCount(ranks.len()));
    }
    let mut squares = [None; 64];
    for (i, rank_text) in ranks.iter().enumerate() {
        let rank = 7 - i as u8;
        let mut file = 0usize;
        for c in rank_text.chars() {
            if let Some(d) = c.to_digit(10).filter(|d| (1..=8).contains(d)) {
                file += d as usize;
            } else {
                let piece = Piece::from_fen_char(c).ok_or(FenError::InvalidPiece(c))?;
                if file < 8 {
                    squares[rank as usize * 8 + file] = Some(piece);
                }
                file += 1;
            }
        }
        if file != 8 {
            return Err(FenError::RankWidth { rank: rank + 1, width: file });
        }
    }

    let side_to_move = match fields[1] {
        "w" => Color::White,
        "b" => Color::Black,
        other => return Err(FenError::InvalidSideToMove(other.to_string())),
    };

    let castling = parse_castling(fields[2])?;

    let en_passant = match fields[3] {
        "-" => None,
        ep => {
            let sq: Square = ep.parse().map_err(|_| FenError::InvalidEnPassant(ep.to_string()))?;
            let expected_rank = if side_to_move == Color::White { 5 } else { 2 };
            if sq.rank() != expected_rank {
                return Err(FenError::InvalidEnPassant(ep.to_string()));
            }
            Some(sq)
        }
    };

    let (halfmove_clock, fullmove_number) = if fields.len() == 6 {
        let half = fields[4].parse::<u32>().map_err(|_| FenError::InvalidClock(fields[4].to_string()))?;
        let full = fields[5]
            .parse::<u32>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| FenError::InvalidClock(fields[5].to_string()))?;
        (half, full)
    } else {
        (0, 1)
    };

    let mut board = BoardState { squares, side_to_move, castling, en_passant, halfmove_clock, fullmove_number };
    validate(&board)?;
    drop_unsupported_castling(&mut board);
    canonicalize_en_passant(&mut board);
    Ok(board)
}

fn parse_castling(field: &str) -> Result<CastlingRights, FenError> {
    let mut rights = CastlingRights::default();
    if field == "-" {
        return Ok(rights);
    }
    let err = || FenError::InvalidCastling(field.to_string());
    for c in field.chars() {
        let slot = match c {
            'K' => &mut rights.white_kingside,
            'Q' => &mut rights.white_queenside,
            'k' => &mut rights.black_kingside,
            'q' => &mut rights.black_queenside,
            _ => return Err(err()),
        };
        if *slot {
            return Err(err());
        }
        *slot = true;
    }
    Ok(rights)
}

fn validate(board: &BoardState) -> Result<(), FenError> {
    for color in [Color::White, Color::Black] {
        let count = board.pieces().filter(|(_, p)| *p == Piece::new(color, PieceKind::King)).count();
        if count != 1 {
            return Err(FenError::KingCount { color, count });
        }
    }
    if board
        .pieces()
        .any(|(sq, p)| p.kind == PieceKind::Pawn && (sq.rank() == 0 || sq.rank() == 7))
    {
        return Err(FenError::PawnOnBackRank);
    }
    if in_check(board, board.side_to_move.opposite()) {
        return Err(FenError::OpponentInCheck);
    }
    Ok(())
}

fn drop_unsupported_castling(board: &mut BoardState) {
    let has = |idx: usize, piece: Piece| board.squares[idx] == Some(piece);
    let wk = has(4, Piece::new(Color::White, PieceKind::King));
    let bk = has(60, Piece::new(Color::Black, PieceKind::King));
    let wr = Piece::new(Color::White, PieceKind::Rook);
    let br = Piece::new(Color::Black, PieceKind::Rook);
    let mut c = board.castling;
    c.white_kingside &= wk && has(7, wr);
    c.white_queenside &= wk && has(0, wr);
    c.black_kingside &= bk && has(63, br);
    c.black_queenside &= bk && has(56, br);
    board.castling = c;
}

pub fn render_placement(board: &BoardState) -> String {
    let mut out = String::with_capacity(64);
    for rank in (0..8).rev() {
        let mut empty = 0;
        for file in 0..8 {
            match board.squares[rank * 8 + file] {
                None => empty += 1,
                Some(p) => {
                    if empty > 0 {
                        out.push(char::from_digit(empty, 10).unwrap());
                        empty = 0;
                    }
                    out.push(p.fen_char());
                }
            }
        }
        if empty > 0 {
            out.push(char::from_digit(empty, 10).unwrap());
        }
        if rank > 0 {
            out.push('/');
        }
    }
    out
}

pub(crate) fn render_castling(rights: CastlingRights) -> String {
    if rights.is_empty() {
        return "-".to_string();
    }
    let mut s = String::new();
    for (on, c) in [
        (rights.white_kingside, 'K'),
        (rights.white_queenside, 'Q'),
        (rights.black_kingside, 'k'),
        (rights.black_queenside, 'q'),
    ] {
        if on {
            s.push(c);
        }
    }
    s
}

/// Canonical six-field FEN.
pub fn render_fen(board: &BoardState) -> String {
    format!(
        "{} {} {} {} {} {}",
        render_placement(board),
        if board.side_to_move == Color::White { "w" } else { "b" },
        render_castling(board.castling),
        board.en_passant.map_or_else(|| "-".to_string(), |s| s.to_string()),
        board.halfmove_clock,
        board.fullmove_number,
    )
}
