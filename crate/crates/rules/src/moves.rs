use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::types::{PieceKind, Square};

/// A move in UCI long algebraic form: `e2e4`, `e7e8q`. Castling is the king's
/// two-square move (`e1g1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MoveUci {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<PieceKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid UCI move text '{0}'")]
pub struct MoveParseError(pub String);

impl MoveUci {
    pub fn new(from: Square, to: Square, promotion: Option<PieceKind>) -> Self {
        MoveUci { from, to, promotion }
    }

    fn sort_key(&self) -> (u8, u8, u8, u8, Option<char>) {
        (
            self.from.file(),
            self.from.rank(),
            self.to.file(),
            self.to.rank(),
            self.promotion.map(PieceKind::letter),
        )
    }
}

// Ordering is the byte order of the UCI text, so sorting a move list sorts it
// lexicographically.
impl Ord for MoveUci {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for MoveUci {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MoveUci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.from, self.to)?;
        if let Some(p) = self.promotion {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for MoveUci {
    type Err = MoveParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || MoveParseError(s.to_string());
        if !(s.len() == 4 || s.len() == 5) || !s.is_ascii() {
            return Err(err());
        }
        let from: Square = s[0..2].parse().map_err(|_| err())?;
        let to: Square = s[2..4].parse().map_err(|_| err())?;
        let promotion = match s.as_bytes().get(4) {
            None => None,
            Some(b'n') => Some(PieceKind::Knight),
            Some(b'b') => Some(PieceKind::Bishop),
            Some(b'r') => Some(PieceKind::Rook),
            Some(b'q') => Some(PieceKind::Queen),
            Some(_) => return Err(err()),
        };
        if from == to {
            return Err(err());
        }
        Ok(MoveUci { from, to, promotion })
    }
}

impl Serialize for MoveUci {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MoveUci {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_promotion() {
        let m: MoveUci = "e2e4".parse().unwrap();
        assert_eq!(m.to_string(), "e2e4");
        let p: MoveUci = "e7e8q".parse().unwrap();
        assert_eq!(p.promotion, Some(PieceKind::Queen));
        assert_eq!(p.to_string(), "e7e8q");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "e2", "e2e9", "i2e4", "e2e4k", "e2e4qq", "E2E4", "e2e2", "é2e4"] {
            assert!(bad.parse::<MoveUci>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ordering_matches_text() {
        let mut moves: Vec<MoveUci> = ["h7h5", "a7a6", "e7e8q", "e7e8", "b8c6", "a7a5", "e7e8b"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        moves.sort();
        let text: Vec<String> = moves.iter().map(|m| m.to_string()).collect();
        let mut expected = text.clone();
        expected.sort();
        assert_eq!(text, expected);
    }
}
