use agentchess_rules::{legal_moves, BoardState, Color, MoveUci};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{ModelError, ModelErrorKind, MovePlayer};

/// Deterministic generator: the same seed and stream always yield the same
/// draws.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededRng { seed, rng }
    }

    /// Stream reserved for a side of the board, so both players of one game
    /// draw independently from the game seed.
    pub fn for_side(seed: u64, color: Color, offset: u64) -> Self {
        let side = match color {
            Color::White => 1,
            Color::Black => 2,
        };
        Self::with_stream(seed, offset * 2 + side)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        items.choose(&mut self.rng)
    }
}

/// Uniform choice over the legal moves; None when there are none.
pub fn random_move(board: &BoardState, rng: &mut SeededRng) -> Option<MoveUci> {
    rng.choose(&legal_moves(board)).copied()
}

pub struct RandomPlayer {
    rng: SeededRng,
}

impl RandomPlayer {
    pub fn new(rng: SeededRng) -> Self {
        RandomPlayer { rng }
    }
}

impl MovePlayer for RandomPlayer {
    fn choose_move(&mut self, board: &BoardState, _: &[MoveUci]) -> Result<MoveUci, ModelError> {
        random_move(board, &mut self.rng).ok_or_else(|| ModelError::new(ModelErrorKind::Engine, "no legal moves"))
    }

    fn label(&self) -> String {
        "random".to_string()
    }
}
