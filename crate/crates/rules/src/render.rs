use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::board::BoardState;
use crate::fen::render_fen;
use crate::types::Square;

/// Placeholder glyph for empty squares on the unicode board.
pub const EMPTY_GLYPH: char = '⭘';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoardStyle {
    #[default]
    Unicode,
    Ascii,
    Fen,
}

impl fmt::Display for BoardStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoardStyle::Unicode => "unicode",
            BoardStyle::Ascii => "ascii",
            BoardStyle::Fen => "fen",
        })
    }
}

impl FromStr for BoardStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unicode" => Ok(BoardStyle::Unicode),
            "ascii" => Ok(BoardStyle::Ascii),
            "fen" => Ok(BoardStyle::Fen),
            other => Err(format!("unknown board style '{other}'")),
        }
    }
}

/// Renders the board as text. Grid styles print rank 8 first, files a to h,
/// squares separated by single spaces.
pub fn render_board(board: &BoardState, style: BoardStyle) -> String {
    match style {
        BoardStyle::Fen => render_fen(board),
        BoardStyle::Unicode => grid(board, |p| p.map_or(EMPTY_GLYPH, |p| p.unicode_glyph())),
        BoardStyle::Ascii => grid(board, |p| p.map_or('.', |p| p.fen_char())),
    }
}

fn grid(board: &BoardState, glyph: impl Fn(Option<crate::types::Piece>) -> char) -> String {
    (0..8u8)
        .rev()
        .map(|rank| {
            (0..8u8)
                .map(|file| glyph(board.piece_at(Square::from_coords(file, rank).unwrap())).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fen::{parse_fen, STARTING_FEN};

    #[test]
    fn ascii_start() {
        let text = render_board(&BoardState::starting_position(), BoardStyle::Ascii);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "r n b q k b n r");
        assert_eq!(lines[1], "p p p p p p p p");
        assert_eq!(lines[2], ". . . . . . . .");
        assert_eq!(lines[7], "R N B Q K B N R");
    }

    #[test]
    fn ascii_matches_g4_example() {
        // Same position as the FEN board example, after 1.g4.
        let b = parse_fen("rnbqkbnr/pppppppp/8/8/6P1/8/PPPPPP1P/RNBQKBNR b KQkq - 0 1").unwrap();
        let text = render_board(&b, BoardStyle::Ascii);
        assert_eq!(text.lines().nth(4).unwrap(), ". . . . . . P .");
        assert_eq!(text.lines().nth(6).unwrap(), "P P P P P P . P");
    }

    #[test]
    fn ascii_empty_squares() {
        let b = parse_fen("8/8/8/8/8/8/8/K6k w - - 0 1").unwrap();
        let text = render_board(&b, BoardStyle::Ascii);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[..7].iter().all(|l| *l == ". . . . . . . ."));
        assert_eq!(lines[7], "K . . . . . . k");
    }

    #[test]
    fn unicode_start() {
        let text = render_board(&BoardState::starting_position(), BoardStyle::Unicode);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "♜ ♞ ♝ ♛ ♚ ♝ ♞ ♜");
        assert_eq!(lines[3], "⭘ ⭘ ⭘ ⭘ ⭘ ⭘ ⭘ ⭘");
        assert_eq!(lines[7], "♖ ♘ ♗ ♕ ♔ ♗ ♘ ♖");
    }

    #[test]
    fn fen_style_is_fen() {
        assert_eq!(render_board(&BoardState::starting_position(), BoardStyle::Fen), STARTING_FEN);
    }
}
