//! Whole games and batches of games.

use std::fmt;
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use agentchess_rules::{
    apply_move, game_status, parse_fen, render_fen, BoardState, Color, FenError, GameStatus, MoveUci, PositionHistory,
};
use serde::{Deserialize, Serialize};

use crate::agent::{ModelError, ModelErrorKind, TokenUsage};
use crate::dialog::{run_ply, DialogLimits, PlyCounts, PlyOutcome, PlyTranscript, ProtocolConfigError, ProtocolVariant};
use crate::players::{PlayerSpec, SidePlayer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    /// Subject model errors remove the game from scoring.
    #[default]
    ExcludeModelErrors,
    /// Subject model errors count as losses.
    CountModelErrorsAsLoss,
}

fn black() -> Color {
    Color::Black
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub white: PlayerSpec,
    pub black: PlayerSpec,
    /// The side whose performance is measured.
    #[serde(default = "black")]
    pub subject: Color,
    #[serde(default)]
    pub limits: DialogLimits,
    #[serde(default)]
    pub variant: ProtocolVariant,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub error_policy: ErrorPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_fen: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum GameConfigError {
    #[error(transparent)]
    Protocol(#[from] ProtocolConfigError),
    #[error("start position: {0}")]
    StartFen(#[from] FenError),
    #[error("{0}")]
    Player(ModelError),
    #[error("only the subject may be a dialog player")]
    DialogOpponent,
}

impl GameConfig {
    pub fn new(white: PlayerSpec, black: PlayerSpec) -> Self {
        GameConfig {
            white,
            black,
            subject: Color::Black,
            limits: DialogLimits::default(),
            variant: ProtocolVariant::default(),
            seed: 0,
            error_policy: ErrorPolicy::default(),
            start_fen: None,
        }
    }

    pub fn spec(&self, color: Color) -> &PlayerSpec {
        match color {
            Color::White => &self.white,
            Color::Black => &self.black,
        }
    }

    pub fn start_board(&self) -> Result<BoardState, FenError> {
        match &self.start_fen {
            Some(f) => parse_fen(f),
            None => Ok(BoardState::starting_position()),
        }
    }

    pub fn validate(&self) -> Result<(), GameConfigError> {
        self.limits.validate()?;
        self.variant.validate()?;
        self.start_board()?;
        for c in [Color::White, Color::Black] {
            self.spec(c).validate().map_err(GameConfigError::Player)?;
        }
        if self.spec(self.subject.opposite()).is_dialog() {
            return Err(GameConfigError::DialogOpponent);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum TerminationReason {
    CheckmateLlm,
    CheckmateOpponent,
    Stalemate,
    InsufficientMaterial,
    SeventyfiveMoves,
    FivefoldRepetition,
    MaxMoves,
    TooManyWrongActions,
    MaxTurns,
    ModelError { side: Color, kind: ModelErrorKind, message: String },
}

impl TerminationReason {
    pub fn is_draw(&self) -> bool {
        matches!(
            self,
            TerminationReason::Stalemate
                | TerminationReason::InsufficientMaterial
                | TerminationReason::SeventyfiveMoves
                | TerminationReason::FivefoldRepetition
                | TerminationReason::MaxMoves
        )
    }

    pub fn is_instruction_failure(&self) -> bool {
        matches!(self, TerminationReason::TooManyWrongActions | TerminationReason::MaxTurns)
    }

    pub fn is_chess_based(&self) -> bool {
        matches!(self, TerminationReason::CheckmateLlm | TerminationReason::CheckmateOpponent) || self.is_draw()
    }

    pub fn name(&self) -> &'static str {
        match self {
            TerminationReason::CheckmateLlm => "checkmate_llm",
            TerminationReason::CheckmateOpponent => "checkmate_opponent",
            TerminationReason::Stalemate => "stalemate",
            TerminationReason::InsufficientMaterial => "insufficient_material",
            TerminationReason::SeventyfiveMoves => "seventyfive_moves",
            TerminationReason::FivefoldRepetition => "fivefold_repetition",
            TerminationReason::MaxMoves => "max_moves",
            TerminationReason::TooManyWrongActions => "too_many_wrong_actions",
            TerminationReason::MaxTurns => "max_turns",
            TerminationReason::ModelError { .. } => "model_error",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationReason::ModelError { side, kind, .. } => write!(f, "model_error({kind}, {side})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectResult {
    Win,
    Draw,
    Loss,
    Excluded,
}

impl SubjectResult {
    /// Points for the subject: 1, 0.5 or 0; None when excluded.
    pub fn points(self) -> Option<f64> {
        match self {
            SubjectResult::Win => Some(1.0),
            SubjectResult::Draw => Some(0.5),
            SubjectResult::Loss => Some(0.0),
            SubjectResult::Excluded => None,
        }
    }
}

pub fn score(reason: &TerminationReason, subject: Color, policy: ErrorPolicy) -> SubjectResult {
    match reason {
        TerminationReason::CheckmateLlm => SubjectResult::Win,
        TerminationReason::CheckmateOpponent => SubjectResult::Loss,
        r if r.is_draw() => SubjectResult::Draw,
        TerminationReason::ModelError { side, .. } if *side != subject => SubjectResult::Excluded,
        TerminationReason::ModelError { .. } if policy == ErrorPolicy::ExcludeModelErrors => SubjectResult::Excluded,
        _ => SubjectResult::Loss,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlyRecord {
    pub mover: Color,
    /// None when the mover failed to produce a move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uci: Option<MoveUci>,
    pub fen_before: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fen_after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PlyTranscript>,
}

/// Sums over the subject's dialog transcripts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameStats {
    pub subject_dialog_plys: u32,
    pub counts: PlyCounts,
    pub tokens: TokenUsage,
}

impl GameStats {
    pub fn from_plys(plys: &[PlyRecord], subject: Color) -> Self {
        let mut s = GameStats::default();
        for t in plys.iter().filter(|p| p.mover == subject).filter_map(|p| p.transcript.as_ref()) {
            s.subject_dialog_plys += 1;
            s.counts += t.counts;
            let u = t.tokens();
            for (acc, v) in [
                (&mut s.tokens.prompt_tokens, u.prompt_tokens),
                (&mut s.tokens.completion_tokens, u.completion_tokens),
                (&mut s.tokens.reasoning_tokens, u.reasoning_tokens),
            ] {
                if let Some(v) = v {
                    *acc = Some(acc.unwrap_or(0) + v);
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub index: u64,
    pub config: GameConfig,
    pub subject_label: String,
    pub opponent_label: String,
    pub plys: Vec<PlyRecord>,
    pub termination: TerminationReason,
    pub result: SubjectResult,
    /// Moves actually played.
    pub ply_count: u32,
    pub full_moves: u32,
    pub stats: GameStats,
    /// Wall-clock information; the only non-deterministic part of a record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl GameRecord {
    pub fn is_excluded(&self) -> bool {
        self.result == SubjectResult::Excluded
    }

    pub fn subject(&self) -> Color {
        self.config.subject
    }

    /// Same record with timing removed, for comparisons across runs.
    pub fn without_timing(&self) -> GameRecord {
        GameRecord { timing: None, ..self.clone() }
    }

    /// (position before, move) for every move the subject completed.
    pub fn subject_moves(&self) -> impl Iterator<Item = (&str, MoveUci)> {
        let subject = self.config.subject;
        self.plys.iter().filter(move |p| p.mover == subject).filter_map(|p| Some((p.fen_before.as_str(), p.uci?)))
    }
}

/// Builds the player for one side of a game.
pub type PlayerFactory = dyn Fn(&GameConfig, Color) -> Result<SidePlayer, ModelError> + Sync;

pub fn default_factory(cfg: &GameConfig, color: Color) -> Result<SidePlayer, ModelError> {
    cfg.spec(color).build(color, cfg.seed)
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub fn play_game(cfg: &GameConfig, index: u64) -> GameRecord {
    play_game_with(cfg, index, &default_factory)
}

pub fn play_game_with(cfg: &GameConfig, index: u64, factory: &PlayerFactory) -> GameRecord {
    let started = Instant::now();
    let started_unix_ms = now_ms();
    let subject = cfg.subject;
    let mut plys: Vec<PlyRecord> = Vec::new();
    let mut labels = [cfg.white.label(), cfg.black.label()];

    let termination = (|| {
        let mut board = match cfg.start_board() {
            Ok(b) => b,
            Err(e) => {
                return TerminationReason::ModelError { side: subject, kind: ModelErrorKind::Config, message: e.to_string() }
            }
        };
        let mut players = Vec::with_capacity(2);
        for color in [Color::White, Color::Black] {
            match factory(cfg, color) {
                Ok(p) => {
                    labels[color as usize] = p.label();
                    players.push(p);
                }
                Err(e) => return TerminationReason::ModelError { side: color, kind: e.kind, message: e.message },
            }
        }
        let mut history = PositionHistory::starting_from(&board);
        let mut played: Vec<MoveUci> = Vec::new();
        let max_plys = cfg.limits.max_plys() as usize;

        loop {
            match game_status(&board, &history) {
                GameStatus::Ongoing => {}
                GameStatus::Checkmate { winner } if winner == subject => return TerminationReason::CheckmateLlm,
                GameStatus::Checkmate { .. } => return TerminationReason::CheckmateOpponent,
                GameStatus::Stalemate => return TerminationReason::Stalemate,
                GameStatus::InsufficientMaterial => return TerminationReason::InsufficientMaterial,
                GameStatus::SeventyfiveMoves => return TerminationReason::SeventyfiveMoves,
                GameStatus::FivefoldRepetition => return TerminationReason::FivefoldRepetition,
            }
            if played.len() >= max_plys {
                return TerminationReason::MaxMoves;
            }
            let mover = board.side_to_move();
            let fen_before = render_fen(&board);
            let mut ply = PlyRecord { mover, uci: None, fen_before, fen_after: None, transcript: None };
            let fail = |e: ModelError| TerminationReason::ModelError { side: mover, kind: e.kind, message: e.message };

            let next = match &mut players[mover as usize] {
                SidePlayer::Moves(p) => match p.choose_move(&board, &played) {
                    Ok(m) => match apply_move(&board, m) {
                        Ok(b) => Ok((m, b)),
                        Err(e) => Err(fail(ModelError::new(ModelErrorKind::Engine, e.to_string()))),
                    },
                    Err(e) => Err(fail(e)),
                },
                SidePlayer::Dialog(agent) => {
                    let visible: &[MoveUci] = if cfg.variant.include_move_history { &played } else { &[] };
                    let r = run_ply(&board, mover, visible, agent.as_mut(), &cfg.limits, &cfg.variant);
                    let outcome = r.transcript.outcome.clone();
                    ply.transcript = Some(r.transcript);
                    match (outcome, r.applied) {
                        (PlyOutcome::MoveMade { .. }, Some(applied)) => Ok(applied),
                        (PlyOutcome::TooManyWrongActions, _) => Err(TerminationReason::TooManyWrongActions),
                        (PlyOutcome::MaxTurns, _) => Err(TerminationReason::MaxTurns),
                        (PlyOutcome::ModelError { error }, _) => Err(fail(error)),
                        (PlyOutcome::MoveMade { .. }, None) => unreachable!("a made move always carries the new board"),
                    }
                }
            };
            match next {
                Ok((m, b)) => {
                    ply.uci = Some(m);
                    ply.fen_after = Some(render_fen(&b));
                    plys.push(ply);
                    history.push(&b);
                    played.push(m);
                    board = b;
                }
                Err(reason) => {
                    plys.push(ply);
                    return reason;
                }
            }
        }
    })();

    let ply_count = plys.iter().filter(|p| p.uci.is_some()).count() as u32;
    let stats = GameStats::from_plys(&plys, subject);
    let result = score(&termination, subject, cfg.error_policy);
    GameRecord {
        index,
        config: cfg.clone(),
        subject_label: labels[subject as usize].clone(),
        opponent_label: labels[subject.opposite() as usize].clone(),
        plys,
        termination,
        result,
        ply_count,
        full_moves: ply_count / 2,
        stats,
        timing: Some(Timing { started_unix_ms, duration_ms: started.elapsed().as_millis() as u64 }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub games: u64,
    pub parallelism: usize,
    pub seed_base: u64,
    /// One line per finished game on standard error.
    pub progress: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { games: 1, parallelism: 1, seed_base: 0, progress: false }
    }
}

/// Config of game `i`: the template with seed `seed_base + i`.
pub fn game_config(template: &GameConfig, seed_base: u64, i: u64) -> GameConfig {
    GameConfig { seed: seed_base.wrapping_add(i), ..template.clone() }
}

pub fn run_games(template: &GameConfig, opts: RunOptions, sink: &mut dyn FnMut(&GameRecord)) -> Vec<GameRecord> {
    run_games_with(template, opts, &default_factory, sink)
}

/// Plays `opts.games` games. Records reach `sink` as soon as each game ends,
/// in completion order; the returned list is in game index order.
pub fn run_games_with(
    template: &GameConfig,
    opts: RunOptions,
    factory: &PlayerFactory,
    sink: &mut dyn FnMut(&GameRecord),
) -> Vec<GameRecord> {
    let play = |i: u64| play_game_with(&game_config(template, opts.seed_base, i), i, factory);
    let mut records = Vec::with_capacity(opts.games as usize);
    let mut collect = |r: GameRecord| {
        if opts.progress {
            eprintln!("game {}: {} after {} plys", r.index, r.termination, r.ply_count);
        }
        sink(&r);
        records.push(r);
    };

    if opts.parallelism <= 1 || !cfg!(feature = "parallel") {
        for i in 0..opts.games {
            collect(play(i));
        }
    } else {
        let (tx, rx) = mpsc::channel::<GameRecord>();
        std::thread::scope(|s| {
            s.spawn(move || produce_parallel(opts, &play, tx));
            for r in rx {
                collect(r);
            }
        });
    }
    records.sort_by_key(|r| r.index);
    records
}

#[cfg(feature = "parallel")]
fn produce_parallel(opts: RunOptions, play: &(dyn Fn(u64) -> GameRecord + Sync), tx: mpsc::Sender<GameRecord>) {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.parallelism).build().expect("thread pool");
    pool.install(|| {
        (0..opts.games).into_par_iter().for_each_with(tx, |tx, i| {
            let _ = tx.send(play(i));
        })
    });
}

#[cfg(not(feature = "parallel"))]
fn produce_parallel(opts: RunOptions, play: &(dyn Fn(u64) -> GameRecord + Sync), tx: mpsc::Sender<GameRecord>) {
    for i in 0..opts.games {
        let _ = tx.send(play(i));
    }
}
