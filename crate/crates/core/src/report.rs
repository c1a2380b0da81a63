//! Metric aggregation over game records and leaderboard documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::match_runner::{GameRecord, SubjectResult, TerminationReason};

/// Share of scorable games per termination kind, in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TerminationBreakdown {
    pub checkmate_llm: f64,
    pub checkmate_opponent: f64,
    pub too_many_wrong_actions: f64,
    pub max_turns: f64,
    pub model_error: f64,
    pub stalemate: f64,
    pub insufficient_material: f64,
    pub seventyfive_moves: f64,
    pub fivefold_repetition: f64,
    pub max_moves: f64,
}

impl TerminationBreakdown {
    fn slot(&mut self, r: &TerminationReason) -> &mut f64 {
        match r {
            TerminationReason::CheckmateLlm => &mut self.checkmate_llm,
            TerminationReason::CheckmateOpponent => &mut self.checkmate_opponent,
            TerminationReason::TooManyWrongActions => &mut self.too_many_wrong_actions,
            TerminationReason::MaxTurns => &mut self.max_turns,
            TerminationReason::ModelError { .. } => &mut self.model_error,
            TerminationReason::Stalemate => &mut self.stalemate,
            TerminationReason::InsufficientMaterial => &mut self.insufficient_material,
            TerminationReason::SeventyfiveMoves => &mut self.seventyfive_moves,
            TerminationReason::FivefoldRepetition => &mut self.fivefold_repetition,
            TerminationReason::MaxMoves => &mut self.max_moves,
        }
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.checkmate_llm,
            self.checkmate_opponent,
            self.too_many_wrong_actions,
            self.max_turns,
            self.model_error,
            self.stalemate,
            self.insufficient_material,
            self.seventyfive_moves,
            self.fivefold_repetition,
            self.max_moves,
        ]
    }

    /// Instruction failures: wrong actions plus max turns.
    pub fn instruction(&self) -> f64 {
        self.too_many_wrong_actions + self.max_turns
    }

    /// Draws other than the move cap.
    pub fn chess_draws(&self) -> f64 {
        self.stalemate + self.insufficient_material + self.seventyfive_moves + self.fivefold_repetition
    }

    pub fn draws(&self) -> f64 {
        self.chess_draws() + self.max_moves
    }
}

/// Per-ply action averages over the subject's dialog plys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionAverages {
    pub board_queries: f64,
    pub legal_move_queries: f64,
    pub illegal_move_attempts: f64,
    pub unparsable_replies: f64,
    pub turns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub total_games: usize,
    pub scorable_games: usize,
    pub excluded_games: usize,
    pub llm_wins: usize,
    pub opponent_wins: usize,
    pub draws: usize,
    pub win_loss_percent: f64,
    pub breakdown: TerminationBreakdown,
    pub avg_plys: f64,
    pub subject_dialog_plys: u64,
    pub per_ply: ActionAverages,
    /// Unparsable replies per 1000 subject dialog plys.
    pub wrong_actions_per_1000: f64,
    /// Illegal move attempts per 1000 subject dialog plys.
    pub wrong_moves_per_1000: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_completion_tokens_per_ply: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("no scorable games among {0} records")]
    NoScorableGames(usize),
    #[error("no models to report")]
    NoModels,
    #[error("leaderboard parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
}

pub fn win_loss_percent(wins: usize, losses: usize, scorable: usize) -> f64 {
    (0.5 * ((wins as f64 - losses as f64) / scorable as f64) + 0.5) * 100.0
}

pub fn aggregate(records: &[GameRecord]) -> Result<AggregateStats, ReportError> {
    let scorable: Vec<&GameRecord> = records.iter().filter(|r| !r.is_excluded()).collect();
    if scorable.is_empty() {
        return Err(ReportError::NoScorableGames(records.len()));
    }
    let n = scorable.len();
    let count = |res| scorable.iter().filter(|r| r.result == res).count();
    let (wins, losses, draws) = (count(SubjectResult::Win), count(SubjectResult::Loss), count(SubjectResult::Draw));

    let mut breakdown = TerminationBreakdown::default();
    for r in &scorable {
        *breakdown.slot(&r.termination) += 1.0;
    }
    for v in [
        &mut breakdown.checkmate_llm,
        &mut breakdown.checkmate_opponent,
        &mut breakdown.too_many_wrong_actions,
        &mut breakdown.max_turns,
        &mut breakdown.model_error,
        &mut breakdown.stalemate,
        &mut breakdown.insufficient_material,
        &mut breakdown.seventyfive_moves,
        &mut breakdown.fivefold_repetition,
        &mut breakdown.max_moves,
    ] {
        *v = *v / n as f64 * 100.0;
    }

    let plys: u64 = scorable.iter().map(|r| r.ply_count as u64).sum();
    let dialog_plys: u64 = scorable.iter().map(|r| r.stats.subject_dialog_plys as u64).sum();
    let sum = |f: fn(&GameRecord) -> u64| scorable.iter().map(|r| f(r)).sum::<u64>() as f64;
    let board = sum(|r| r.stats.counts.board_queries as u64);
    let legal = sum(|r| r.stats.counts.legal_move_queries as u64);
    let illegal = sum(|r| r.stats.counts.illegal_move_attempts as u64);
    let unparsable = sum(|r| r.stats.counts.unparsable_replies as u64);
    let turns = sum(|r| r.stats.counts.turns_used as u64);
    let per = |x: f64| if dialog_plys == 0 { 0.0 } else { x / dialog_plys as f64 };
    let completion: Vec<u64> = scorable.iter().filter_map(|r| r.stats.tokens.completion_tokens).collect();
    let avg_completion_tokens_per_ply =
        (!completion.is_empty() && dialog_plys > 0).then(|| completion.iter().sum::<u64>() as f64 / dialog_plys as f64);

    Ok(AggregateStats {
        total_games: records.len(),
        scorable_games: n,
        excluded_games: records.len() - n,
        llm_wins: wins,
        opponent_wins: losses,
        draws,
        win_loss_percent: win_loss_percent(wins, losses, n),
        breakdown,
        avg_plys: plys as f64 / n as f64,
        subject_dialog_plys: dialog_plys,
        per_ply: ActionAverages {
            board_queries: per(board),
            legal_move_queries: per(legal),
            illegal_move_attempts: per(illegal),
            unparsable_replies: per(unparsable),
            turns: per(turns),
        },
        wrong_actions_per_1000: per(unparsable) * 1000.0,
        wrong_moves_per_1000: per(illegal) * 1000.0,
        avg_completion_tokens_per_ply,
    })
}

/// Aggregates grouped by subject label. Models without scorable games are
/// left out.
pub fn aggregate_by_model(records: &[GameRecord]) -> BTreeMap<String, AggregateStats> {
    let mut groups: BTreeMap<String, Vec<GameRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.subject_label.clone()).or_default().push(r.clone());
    }
    groups.into_iter().filter_map(|(k, v)| aggregate(&v).ok().map(|s| (k, s))).collect()
}

pub const LEADERBOARD_COLUMNS: [&str; 19] = [
    "model",
    "games",
    "scorable",
    "excluded",
    "win_loss",
    "draw",
    "mate_llm",
    "mate_opponent",
    "wrong_actions",
    "max_turns",
    "model_error",
    "stalemate",
    "insufficient_material",
    "seventyfive_moves",
    "fivefold_repetition",
    "max_moves",
    "avg_plys",
    "wrong_actions_per_1000",
    "wrong_moves_per_1000",
];

/// One leaderboard line, numbers at display precision.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub model: String,
    pub games: usize,
    pub scorable: usize,
    pub excluded: usize,
    /// Every remaining column in `LEADERBOARD_COLUMNS` order.
    pub values: [f64; 15],
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl LeaderboardRow {
    pub fn from_stats(model: &str, s: &AggregateStats) -> Self {
        let b = &s.breakdown;
        let raw = [
            s.win_loss_percent,
            b.draws(),
            b.checkmate_llm,
            b.checkmate_opponent,
            b.too_many_wrong_actions,
            b.max_turns,
            b.model_error,
            b.stalemate,
            b.insufficient_material,
            b.seventyfive_moves,
            b.fivefold_repetition,
            b.max_moves,
            s.avg_plys,
            s.wrong_actions_per_1000,
            s.wrong_moves_per_1000,
        ];
        LeaderboardRow {
            model: model.to_string(),
            games: s.total_games,
            scorable: s.scorable_games,
            excluded: s.excluded_games,
            values: raw.map(round1),
        }
    }

    pub fn win_loss(&self) -> f64 {
        self.values[0]
    }

    pub fn mate_llm(&self) -> f64 {
        self.values[2]
    }

    fn cells(&self) -> Vec<String> {
        let mut c = vec![self.model.clone(), self.games.to_string(), self.scorable.to_string(), self.excluded.to_string()];
        c.extend(self.values.iter().map(|v| format!("{v:.1}")));
        c
    }

    fn from_cells(row: usize, cells: &[&str]) -> Result<Self, ReportError> {
        let bad = |message: String| ReportError::Parse { row, message };
        if cells.len() != LEADERBOARD_COLUMNS.len() {
            return Err(bad(format!("expected {} columns, found {}", LEADERBOARD_COLUMNS.len(), cells.len())));
        }
        let int = |i: usize| cells[i].trim().parse::<usize>().map_err(|e| bad(format!("{}: {e}", LEADERBOARD_COLUMNS[i])));
        let mut values = [0.0; 15];
        for (k, v) in values.iter_mut().enumerate() {
            let i = k + 4;
            *v = cells[i].trim().parse::<f64>().map_err(|e| bad(format!("{}: {e}", LEADERBOARD_COLUMNS[i])))?;
        }
        Ok(LeaderboardRow { model: cells[0].trim().to_string(), games: int(1)?, scorable: int(2)?, excluded: int(3)?, values })
    }
}

/// Rows sorted by Win/Loss descending, then LLM checkmate rate, then name.
pub fn leaderboard(stats: &BTreeMap<String, AggregateStats>) -> Result<Vec<LeaderboardRow>, ReportError> {
    if stats.is_empty() {
        return Err(ReportError::NoModels);
    }
    let mut rows: Vec<LeaderboardRow> = stats.iter().map(|(m, s)| LeaderboardRow::from_stats(m, s)).collect();
    rows.sort_by(|a, b| {
        let (sa, sb) = (&stats[&a.model], &stats[&b.model]);
        sb.win_loss_percent
            .total_cmp(&sa.win_loss_percent)
            .then(sb.breakdown.checkmate_llm.total_cmp(&sa.breakdown.checkmate_llm))
            .then(a.model.cmp(&b.model))
    });
    Ok(rows)
}

pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LEADERBOARD_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(r.cells()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

pub fn parse_leaderboard_csv(text: &str) -> Result<Vec<LeaderboardRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ReportError::Parse { row: i + 1, message: e.to_string() })?;
        let cells: Vec<&str> = rec.iter().collect();
        rows.push(LeaderboardRow::from_cells(i + 1, &cells)?);
    }
    Ok(rows)
}

pub fn leaderboard_markdown(rows: &[LeaderboardRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", LEADERBOARD_COLUMNS.join(" | "));
    let _ = writeln!(out, "|{}", ["---|"; LEADERBOARD_COLUMNS.len()].concat());
    for r in rows {
        let _ = writeln!(out, "| {} |", r.cells().iter().map(|c| c.replace('|', "\\|")).collect::<Vec<_>>().join(" | "));
    }
    out
}

pub fn parse_leaderboard_markdown(text: &str) -> Result<Vec<LeaderboardRow>, ReportError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().skip(2).enumerate() {
        let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
        let mut cells = Vec::new();
        let mut cur = String::new();
        let mut chars = inner.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '\\' if chars.peek() == Some(&'|') => cur.push(chars.next().expect("peeked")),
                '|' => cells.push(std::mem::take(&mut cur)),
                c => cur.push(c),
            }
        }
        cells.push(cur);
        let refs: Vec<&str> = cells.iter().map(|s| s.as_str()).collect();
        rows.push(LeaderboardRow::from_cells(i + 1, &refs)?);
    }
    Ok(rows)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use agentchess_rules::Color;

    use crate::match_runner::{score, ErrorPolicy, GameConfig, GameRecord, GameStats, TerminationReason};
    use crate::players::PlayerSpec;

    pub fn record(index: u64, model: &str, termination: TerminationReason, plys: u32) -> GameRecord {
        let config = GameConfig::new(PlayerSpec::Random, PlayerSpec::Random);
        GameRecord {
            index,
            result: score(&termination, Color::Black, ErrorPolicy::ExcludeModelErrors),
            config,
            subject_label: model.to_string(),
            opponent_label: "random".to_string(),
            plys: Vec::new(),
            termination,
            ply_count: plys,
            full_moves: plys / 2,
            stats: GameStats::default(),
            timing: None,
        }
    }
}
