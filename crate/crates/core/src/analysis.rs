//! Move-quality analysis of stored games with a UCI engine.
//!
//! Each subject move is searched twice: the position before the move (the
//! engine's best move there decides `is_best`) and the position after it.
//! Scores become centipawns from the subject's side, then win percentages,
//! and the drop in win percentage is classified.

use agentchess_rules::{apply_move, parse_fen, MoveUci};
use serde::{Deserialize, Serialize};

use crate::agent::{ModelError, ModelErrorKind};
use crate::match_runner::GameRecord;
use crate::players::engine::{EngineConfig, EngineSession, RawScore, SearchLimit};

pub const WIN_PERCENT_SLOPE: f64 = 0.00368208;
/// Centipawn value given to any forced mate.
pub const MATE_CP: i32 = 1000;

fn default_path() -> std::path::PathBuf {
    "stockfish".into()
}
fn d_depth() -> u32 {
    20
}
fn d_threads() -> u32 {
    1
}
fn d_hash() -> u32 {
    128
}
fn d_multipv() -> u32 {
    1
}
fn d_skill() -> Option<u32> {
    Some(20)
}
fn d_skill_option() -> String {
    "Skill".to_string()
}
fn d_timeout() -> u64 {
    600_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisEngineConfig {
    #[serde(default = "default_path")]
    pub path: std::path::PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "d_depth")]
    pub depth: u32,
    #[serde(default = "d_threads")]
    pub threads: u32,
    #[serde(default = "d_hash")]
    pub hash_mb: u32,
    #[serde(default = "d_multipv")]
    pub multipv: u32,
    #[serde(default = "d_skill")]
    pub skill: Option<u32>,
    #[serde(default = "d_skill_option")]
    pub skill_option: String,
    #[serde(default = "d_timeout")]
    pub response_timeout_ms: u64,
}

impl AnalysisEngineConfig {
    pub fn new(path: impl Into<std::path::PathBuf>) -> Self {
        AnalysisEngineConfig {
            path: path.into(),
            args: Vec::new(),
            depth: d_depth(),
            threads: d_threads(),
            hash_mb: d_hash(),
            multipv: d_multipv(),
            skill: d_skill(),
            skill_option: d_skill_option(),
            response_timeout_ms: d_timeout(),
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        let mut cfg = EngineConfig::new(&self.path);
        cfg.args = self.args.clone();
        cfg.skill = self.skill;
        cfg.skill_option = self.skill_option.clone();
        cfg.limit = SearchLimit::Depth(self.depth);
        cfg.response_timeout_ms = self.response_timeout_ms;
        cfg.options.insert("Threads".into(), self.threads.to_string());
        cfg.options.insert("Hash".into(), self.hash_mb.to_string());
        cfg.options.insert("MultiPV".into(), self.multipv.to_string());
        cfg
    }
}

/// Centipawns for the side the raw score was reported for. `mate 0` means
/// that side is already mated.
pub fn normalize_score(raw: RawScore) -> i32 {
    match raw {
        RawScore::Cp(v) => v,
        RawScore::Mate(n) if n > 0 => MATE_CP,
        RawScore::Mate(_) => -MATE_CP,
    }
}

pub fn win_percent(cp: f64) -> f64 {
    50.0 + 50.0 * (2.0 / (1.0 + (-WIN_PERCENT_SLOPE * cp).exp()) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    None,
    Inaccuracy,
    Mistake,
    Blunder,
}

pub fn judge_delta(delta: f64) -> Judgment {
    if delta >= 30.0 {
        Judgment::Blunder
    } else if delta >= 20.0 {
        Judgment::Mistake
    } else if delta >= 10.0 {
        Judgment::Inaccuracy
    } else {
        Judgment::None
    }
}

pub fn judge(win_before: f64, win_after: f64) -> Judgment {
    judge_delta(win_before - win_after)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlyEvaluation {
    /// Position of the move within the game's ply list.
    pub ply: usize,
    pub played: MoveUci,
    pub best_move: Option<MoveUci>,
    pub cp_before: i32,
    pub cp_after: i32,
    pub win_before: f64,
    pub win_after: f64,
    pub delta: f64,
    pub judgment: Judgment,
    pub is_best: bool,
}

/// Builds one evaluation from the two raw engine scores, each reported for
/// the side to move of its position. The after-move score belongs to the
/// opponent and is negated.
pub fn evaluate_ply(ply: usize, played: MoveUci, best_move: Option<MoveUci>, before: RawScore, after: RawScore) -> PlyEvaluation {
    let cp_before = normalize_score(before);
    let cp_after = -normalize_score(after);
    let win_before = win_percent(cp_before as f64);
    let win_after = win_percent(cp_after as f64);
    let delta = win_before - win_after;
    PlyEvaluation {
        ply,
        played,
        best_move,
        cp_before,
        cp_after,
        win_before,
        win_after,
        delta,
        judgment: judge_delta(delta),
        is_best: best_move == Some(played),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityRates {
    pub subject_plys: usize,
    pub blunders: usize,
    pub mistakes: usize,
    pub inaccuracies: usize,
    pub best: usize,
    pub blunder_rate: f64,
    pub mistake_rate: f64,
    pub inaccuracy_rate: f64,
    pub best_rate: f64,
    /// Mean win percentage after the subject's moves.
    pub average_win_percent: f64,
}

impl QualityRates {
    pub fn from_evaluations<'a>(evals: impl IntoIterator<Item = &'a PlyEvaluation>) -> Self {
        let mut r = QualityRates::default();
        let mut win_sum = 0.0;
        for e in evals {
            r.subject_plys += 1;
            match e.judgment {
                Judgment::Blunder => r.blunders += 1,
                Judgment::Mistake => r.mistakes += 1,
                Judgment::Inaccuracy => r.inaccuracies += 1,
                Judgment::None => {}
            }
            r.best += e.is_best as usize;
            win_sum += e.win_after;
        }
        if r.subject_plys > 0 {
            let n = r.subject_plys as f64;
            r.blunder_rate = r.blunders as f64 / n * 100.0;
            r.mistake_rate = r.mistakes as f64 / n * 100.0;
            r.inaccuracy_rate = r.inaccuracies as f64 / n * 100.0;
            r.best_rate = r.best as f64 / n * 100.0;
            r.average_win_percent = win_sum / n;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameQualitySummary {
    pub game_index: u64,
    pub evaluations: Vec<PlyEvaluation>,
    pub rates: QualityRates,
}

impl GameQualitySummary {
    pub fn new(game_index: u64, evaluations: Vec<PlyEvaluation>) -> Self {
        let rates = QualityRates::from_evaluations(&evaluations);
        GameQualitySummary { game_index, evaluations, rates }
    }
}

/// Rates pooled over every analyzed ply of several games.
pub fn pooled_rates(summaries: &[GameQualitySummary]) -> QualityRates {
    QualityRates::from_evaluations(summaries.iter().flat_map(|s| s.evaluations.iter()))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("game {0} has no subject moves")]
    NoSubjectMoves(u64),
    #[error("game {game}: {error}")]
    Engine { game: u64, error: ModelError },
    #[error("game {game}: stored position is invalid: {message}")]
    BadRecord { game: u64, message: String },
}

pub fn analyze_game(record: &GameRecord, session: &mut EngineSession, depth: u32) -> Result<GameQualitySummary, AnalysisError> {
    let game = record.index;
    let subject = record.config.subject;
    let engine = |error| AnalysisError::Engine { game, error };
    let mut evals = Vec::new();
    for (i, ply) in record.plys.iter().enumerate() {
        let (Some(played), true) = (ply.uci, ply.mover == subject) else { continue };
        let before = parse_fen(&ply.fen_before).map_err(|e| AnalysisError::BadRecord { game, message: e.to_string() })?;
        let after = apply_move(&before, played).map_err(|e| AnalysisError::BadRecord { game, message: e.to_string() })?;
        session.new_game().map_err(engine)?;
        let b = session.search(&before, SearchLimit::Depth(depth)).map_err(engine)?;
        let a = session.search(&after, SearchLimit::Depth(depth)).map_err(engine)?;
        let missing = || engine(ModelError::new(ModelErrorKind::Engine, "search reported no score"));
        let (sb, sa) = (b.score.ok_or_else(missing)?, a.score.ok_or_else(missing)?);
        evals.push(evaluate_ply(i, played, b.best_move, sb, sa));
    }
    if evals.is_empty() {
        return Err(AnalysisError::NoSubjectMoves(game));
    }
    Ok(GameQualitySummary::new(game, evals))
}

/// Analyzes games in parallel with one engine session per worker. Results
/// follow the input order.
pub fn analyze_records(
    records: &[GameRecord],
    cfg: &AnalysisEngineConfig,
    parallelism: usize,
) -> Vec<Result<GameQualitySummary, AnalysisError>> {
    let engine_cfg = cfg.engine_config();
    let run = |slot: &mut Option<EngineSession>, rec: &GameRecord| {
        if slot.is_none() {
            match EngineSession::start(&engine_cfg) {
                Ok(s) => *slot = Some(s),
                Err(error) => return Err(AnalysisError::Engine { game: rec.index, error }),
            }
        }
        let result = analyze_game(rec, slot.as_mut().expect("session started"), cfg.depth);
        if matches!(result, Err(AnalysisError::Engine { .. })) {
            // A failed session may be in any state; start a fresh one next time.
            *slot = None;
        }
        result
    };
    analyze_with(records, parallelism, &run)
}

type AnalyzeFn<'a> = dyn Fn(&mut Option<EngineSession>, &GameRecord) -> Result<GameQualitySummary, AnalysisError> + Sync + 'a;

#[cfg(feature = "parallel")]
fn analyze_with(records: &[GameRecord], parallelism: usize, run: &AnalyzeFn) -> Vec<Result<GameQualitySummary, AnalysisError>> {
    use rayon::prelude::*;
    if parallelism <= 1 {
        let mut slot = None;
        return records.iter().map(|r| run(&mut slot, r)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism).build().expect("thread pool");
    pool.install(|| records.par_iter().map_init(|| None, |slot, r| run(slot, r)).collect())
}

#[cfg(not(feature = "parallel"))]
fn analyze_with(records: &[GameRecord], _parallelism: usize, run: &AnalyzeFn) -> Vec<Result<GameQualitySummary, AnalysisError>> {
    let mut slot = None;
    records.iter().map(|r| run(&mut slot, r)).collect()
}
