//! Append-only JSON-lines game logs.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::match_runner::GameRecord;
use crate::players::PlayerSpec;
use crate::report::{aggregate, AggregateStats};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLogEntry {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_usd: Option<f64>,
    pub record: GameRecord,
    /// Metrics of this game alone; absent when it is excluded from scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<AggregateStats>,
}

impl GameLogEntry {
    pub fn new(record: GameRecord) -> Self {
        let (model, endpoint) = match record.config.spec(record.subject()) {
            PlayerSpec::Llm(c) => (Some(c.model.clone()), Some(c.base_url.clone())),
            PlayerSpec::Moa(m) => (Some(m.synthesizer.model.clone()), Some(m.synthesizer.base_url.clone())),
            _ => (None, None),
        };
        let stats = aggregate(std::slice::from_ref(&record)).ok();
        GameLogEntry { schema_version: SCHEMA_VERSION, model, endpoint, cost_usd: None, record, stats }
    }

    /// Whether the stored metrics match a recomputation from the record.
    pub fn stats_consistent(&self) -> bool {
        aggregate(std::slice::from_ref(&self.record)).ok() == self.stats
    }
}

/// Appends one entry per line, flushing after each so that completed games
/// survive an interrupted run.
pub struct LogWriter {
    file: File,
    path: PathBuf,
}

impl LogWriter {
    pub fn append(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(LogWriter { file, path })
    }

    pub fn write(&mut self, entry: &GameLogEntry) -> io::Result<()> {
        let mut line = serde_json::to_string(entry).map_err(io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogDiagnostic {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LogDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

#[derive(Debug, Default)]
pub struct LoadedLogs {
    pub entries: Vec<GameLogEntry>,
    pub diagnostics: Vec<LogDiagnostic>,
}

/// Log files named by `paths`; directories contribute their `*.jsonl`
/// files in name order.
pub fn log_files(paths: &[PathBuf]) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Reads every entry it can; bad lines become diagnostics and reading goes on.
pub fn load_logs(paths: &[PathBuf]) -> io::Result<LoadedLogs> {
    let mut loaded = LoadedLogs::default();
    for path in log_files(paths)? {
        let reader = BufReader::new(File::open(&path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let diag = |message: String| LogDiagnostic { path: path.clone(), line: i + 1, message };
            let version = serde_json::from_str::<serde_json::Value>(&line)
                .map(|v| v.get("schema_version").and_then(|x| x.as_u64()));
            match version {
                Err(e) => loaded.diagnostics.push(diag(e.to_string())),
                Ok(Some(v)) if v == SCHEMA_VERSION as u64 => match serde_json::from_str::<GameLogEntry>(&line) {
                    Ok(e) => loaded.entries.push(e),
                    Err(e) => loaded.diagnostics.push(diag(e.to_string())),
                },
                Ok(Some(v)) => loaded.diagnostics.push(diag(format!("unsupported schema version {v}"))),
                Ok(None) => loaded.diagnostics.push(diag("missing schema_version".to_string())),
            }
        }
    }
    Ok(loaded)
}
