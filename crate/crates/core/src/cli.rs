//! Command-line front end: `run`, `analyze`, `elo` and `report`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{analyze_records, pooled_rates, AnalysisEngineConfig, AnalysisError, GameQualitySummary, PlyEvaluation};
use crate::elo::{estimate_elo, outcomes_from_records, read_outcomes_csv, BoundaryFlag, EloEstimate, MatchOutcome, SkillRatingMap};
use crate::manifest::{Overrides, RunManifest};
use crate::match_runner::{run_games, GameRecord, RunOptions};
use crate::report::{aggregate, aggregate_by_model, leaderboard, leaderboard_csv, leaderboard_markdown, AggregateStats};
use crate::storage::{load_logs, GameLogEntry, LogWriter};

pub const GAMES_FILE: &str = "games.jsonl";
pub const ANALYSIS_FILE: &str = "analysis.jsonl";

#[derive(Debug, Parser)]
#[command(name = "agentchess", version, about = "Chess evaluation harness for chat-completion agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play the match sets described by a manifest.
    Run(RunArgs),
    /// Score every subject move of logged games with an analysis engine.
    Analyze(AnalyzeArgs),
    /// Estimate Elo from logged games against rated engines, or from an outcome CSV.
    Elo(EloArgs),
    /// Write leaderboards from logged games.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub games: Option<u64>,
    /// Engine skill levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub skill: Option<Vec<u32>>,
    /// Protocol variant preset name.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Log files or directories.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Manifest whose `[analysis]` table configures the engine.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Analysis engine executable; overrides the manifest.
    #[arg(long)]
    pub engine: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EloArgs {
    /// Log files or directories.
    pub logs: Vec<PathBuf>,
    /// CSV of `opponent_rating,score` rows instead of logs.
    #[arg(long, conflicts_with = "logs")]
    pub outcomes: Option<PathBuf>,
    /// Manifest whose `[elo]` table maps skill levels to ratings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = crate::elo::WHITE_ADVANTAGE)]
    pub white_advantage: f64,
    /// Append one CSV row per estimate to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 3 when an estimate hit a bracket end.
    #[arg(long)]
    pub fail_on_clamp: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Log files or directories.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] crate::manifest::ManifestError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Elo(#[from] crate::elo::EloError),
    #[error("{0}")]
    Report(#[from] crate::report::ReportError),
    #[error("{0}")]
    Usage(String),
}

/// Runs a parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Elo(a) => cmd_elo(a),
        Command::Report(a) => cmd_report(a),
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn summary_line(name: &str, s: &AggregateStats) -> String {
    format!(
        "{name}: {} games ({} excluded), Win/Loss {:.1}, mate_llm {:.1}%, mate_opponent {:.1}%, draws {:.1}% (max_moves {:.1}%), instruction {:.1}%, avg plys {:.1}",
        s.total_games,
        s.excluded_games,
        s.win_loss_percent,
        s.breakdown.checkmate_llm,
        s.breakdown.checkmate_opponent,
        s.breakdown.draws(),
        s.breakdown.max_moves,
        s.breakdown.instruction(),
        s.avg_plys
    )
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<GameRecord>, CliError> {
    let loaded = load_logs(paths)?;
    for d in &loaded.diagnostics {
        eprintln!("warning: {d}");
    }
    Ok(loaded.entries.into_iter().map(|e| e.record).collect())
}

fn cmd_run(a: RunArgs) -> Result<i32, CliError> {
    let mut m = RunManifest::load(&a.config)?;
    m.apply(&Overrides {
        out: a.out,
        seed: a.seed,
        parallelism: a.parallelism,
        games: a.games,
        skills: a.skill,
        variant: a.variant,
    });
    let cells = m.cells()?;
    let log_path = m.out.join(GAMES_FILE);
    let mut writer = LogWriter::append(&log_path)?;
    let opts = RunOptions { games: m.games, parallelism: m.parallelism.max(1), seed_base: m.seed, progress: !a.quiet };
    let mut write_error = None;
    for cell in &cells {
        if !a.quiet {
            eprintln!("== {} ({} games)", cell.name, m.games);
        }
        let records = run_games(&cell.config, opts, &mut |r| {
            if let Err(e) = writer.write(&GameLogEntry::new(r.clone())) {
                write_error.get_or_insert(e);
            }
        });
        if let Some(e) = write_error.take() {
            return Err(e.into());
        }
        match aggregate(&records) {
            Ok(s) => println!("{}", summary_line(&cell.name, &s)),
            Err(e) => println!("{}: {e}", cell.name),
        }
    }
    if !a.quiet {
        eprintln!("logs: {}", log_path.display());
    }
    Ok(0)
}

#[derive(Serialize)]
struct SidecarRow<'a> {
    game: usize,
    index: u64,
    model: &'a str,
    #[serde(flatten)]
    evaluation: &'a PlyEvaluation,
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<i32, CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunManifest::load(p)?.analysis,
        None => None,
    };
    if let Some(engine) = &a.engine {
        let c = cfg.get_or_insert_with(|| AnalysisEngineConfig::new(engine));
        c.path = engine.clone();
    }
    let mut cfg = cfg.ok_or_else(|| CliError::Usage("no analysis engine: pass --engine or a manifest with [analysis]".into()))?;
    if let Some(d) = a.depth {
        cfg.depth = d;
    }
    if !cfg.path.is_file() {
        return Err(CliError::Usage(format!("analysis engine not found: {}", cfg.path.display())));
    }
    let records = load_records(&a.logs)?;
    let results = analyze_records(&records, &cfg, a.parallelism.max(1));

    fs::create_dir_all(&a.out)?;
    let mut sidecar = String::new();
    let mut by_model: BTreeMap<&str, (Vec<GameQualitySummary>, usize)> = BTreeMap::new();
    for (game, (rec, res)) in records.iter().zip(&results).enumerate() {
        let slot = by_model.entry(rec.subject_label.as_str()).or_default();
        match res {
            Ok(s) => {
                for e in &s.evaluations {
                    let row = SidecarRow { game, index: rec.index, model: &rec.subject_label, evaluation: e };
                    sidecar.push_str(&serde_json::to_string(&row).map_err(std::io::Error::other)?);
                    sidecar.push('\n');
                }
                slot.0.push(s.clone());
            }
            Err(e) => {
                if !matches!(e, AnalysisError::NoSubjectMoves(_)) {
                    eprintln!("warning: unanalyzed: {e}");
                }
                slot.1 += 1;
            }
        }
    }
    fs::write(a.out.join(ANALYSIS_FILE), sidecar)?;

    let mut csv = String::from("model,games,unanalyzed,plys,blunder,mistake,inaccuracy,best,avg_win\n");
    let mut md = String::from("| model | games | unanalyzed | plys | blunder | mistake | inaccuracy | best | avg_win |\n|---|---|---|---|---|---|---|---|---|\n");
    for (model, (summaries, failed)) in &by_model {
        let r = pooled_rates(summaries);
        let cells = [
            model.to_string(),
            summaries.len().to_string(),
            failed.to_string(),
            r.subject_plys.to_string(),
            format!("{:.1}", r.blunder_rate),
            format!("{:.1}", r.mistake_rate),
            format!("{:.1}", r.inaccuracy_rate),
            format!("{:.1}", r.best_rate),
            format!("{:.1}", r.average_win_percent),
        ];
        let mut w = ::csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(&cells).map_err(std::io::Error::other)?;
        csv.push_str(&String::from_utf8_lossy(&w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?));
        md.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    fs::write(a.out.join("quality.csv"), &csv)?;
    fs::write(a.out.join("quality.md"), &md)?;
    print!("{md}");
    Ok(0)
}

fn estimate_line(name: &str, e: &EloEstimate) -> String {
    let (lo, hi) = e.ci();
    let flag = match e.boundary_flag {
        BoundaryFlag::None => String::new(),
        BoundaryFlag::ClampedLow => " [clamped_low]".into(),
        BoundaryFlag::ClampedHigh => " [clamped_high]".into(),
    };
    format!("{name}: Elo {:.1} ± {:.1} (95% CI {:.1} to {:.1}, {} games){flag}", e.rating, e.me, lo, hi, e.games)
}

fn append_elo_rows(path: &Path, rows: &[(String, EloEstimate)]) -> std::io::Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = ::csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(["model", "games", "rating", "se", "me", "ci_low", "ci_high", "white_advantage", "boundary_flag"])?;
    }
    for (name, e) in rows {
        let (lo, hi) = e.ci();
        let flag = serde_json::to_value(e.boundary_flag).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        w.write_record([
            name.clone(),
            e.games.to_string(),
            format!("{:.4}", e.rating),
            format!("{:.4}", e.se),
            format!("{:.4}", e.me),
            format!("{lo:.4}"),
            format!("{hi:.4}"),
            e.white_advantage.to_string(),
            flag,
        ])?;
    }
    w.flush()
}

fn cmd_elo(a: EloArgs) -> Result<i32, CliError> {
    let groups: Vec<(String, Vec<MatchOutcome>)> = if let Some(p) = &a.outcomes {
        let f = fs::File::open(p)?;
        vec![(p.display().to_string(), read_outcomes_csv(f)?)]
    } else {
        if a.logs.is_empty() {
            return Err(CliError::Usage("pass log paths or --outcomes".into()));
        }
        let map = match &a.config {
            Some(p) => RunManifest::load(p)?.elo,
            None => SkillRatingMap::default(),
        };
        map.validate()?;
        let records = load_records(&a.logs)?;
        let mut by_model: BTreeMap<String, Vec<GameRecord>> = BTreeMap::new();
        for r in records {
            by_model.entry(r.subject_label.clone()).or_default().push(r);
        }
        by_model
            .into_iter()
            .map(|(k, v)| outcomes_from_records(&v, &map).map(|o| (k, o)))
            .collect::<Result<_, _>>()?
    };
    let mut rows = Vec::new();
    for (name, outcomes) in groups {
        let e = estimate_elo(&outcomes, a.white_advantage)?;
        println!("{}", estimate_line(&name, &e));
        rows.push((name, e));
    }
    if let Some(out) = &a.out {
        append_elo_rows(out, &rows)?;
    }
    let clamped = rows.iter().any(|(_, e)| e.boundary_flag != BoundaryFlag::None);
    Ok(if a.fail_on_clamp && clamped { 3 } else { 0 })
}

fn cmd_report(a: ReportArgs) -> Result<i32, CliError> {
    let records = load_records(&a.logs)?;
    if records.is_empty() {
        return Err(CliError::Usage("no game records found".into()));
    }
    let rows = leaderboard(&aggregate_by_model(&records))?;
    fs::create_dir_all(&a.out)?;
    let md = leaderboard_markdown(&rows);
    fs::write(a.out.join("leaderboard.csv"), leaderboard_csv(&rows))?;
    fs::write(a.out.join("leaderboard.md"), &md)?;
    print!("{md}");
    Ok(0)
}
