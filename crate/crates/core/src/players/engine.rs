//! UCI engine sessions over a child-process pipe.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use agentchess_rules::{is_legal, render_fen, BoardState, MoveUci};
use serde::{Deserialize, Serialize};

use crate::agent::{ModelError, ModelErrorKind, MovePlayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchLimit {
    MovetimeMs(u64),
    Depth(u32),
}

impl Default for SearchLimit {
    fn default() -> Self {
        SearchLimit::MovetimeMs(1000)
    }
}

impl SearchLimit {
    fn go_command(&self) -> String {
        match self {
            SearchLimit::MovetimeMs(ms) => format!("go movetime {ms}"),
            SearchLimit::Depth(d) => format!("go depth {d}"),
        }
    }
}

fn default_skill_option() -> String {
    "Skill".to_string()
}

fn default_response_timeout_ms() -> u64 {
    600_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub skill: Option<u32>,
    /// Name of the spin option that sets playing strength.
    #[serde(default = "default_skill_option")]
    pub skill_option: String,
    #[serde(default)]
    pub limit: SearchLimit,
    /// Extra `setoption` pairs sent after the handshake.
    #[serde(default)]
    pub options: BTreeMap<String, String>,
    /// Upper bound on how long any single engine reply may take.
    #[serde(default = "default_response_timeout_ms")]
    pub response_timeout_ms: u64,
}

impl EngineConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        EngineConfig {
            path: path.into(),
            args: Vec::new(),
            skill: None,
            skill_option: default_skill_option(),
            limit: SearchLimit::default(),
            options: BTreeMap::new(),
            response_timeout_ms: default_response_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawScore {
    Cp(i32),
    Mate(i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    /// Last reported score, from the side to move.
    pub score: Option<RawScore>,
    /// None when the engine answers `bestmove (none)`.
    pub best_move: Option<MoveUci>,
    pub bestmove_text: String,
}

fn engine_err(msg: impl Into<String>) -> ModelError {
    ModelError::new(ModelErrorKind::Engine, msg)
}

pub struct EngineSession {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    timeout: Duration,
    searches: u64,
}

impl EngineSession {
    /// Starts the engine, completes the `uci`/`isready` handshake and applies
    /// the skill level and extra options.
    pub fn start(cfg: &EngineConfig) -> Result<Self, ModelError> {
        let mut child = Command::new(&cfg.path)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| ModelError::new(ModelErrorKind::Config, format!("cannot start {}: {e}", cfg.path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session =
            EngineSession { child, stdin, lines: rx, timeout: Duration::from_millis(cfg.response_timeout_ms), searches: 0 };

        session.send("uci")?;
        let intro = session.read_until(|l| l == "uciok")?;
        if let Some(skill) = cfg.skill {
            if let Some((lo, hi)) = spin_range(&intro, &cfg.skill_option) {
                if skill < lo || skill > hi {
                    return Err(ModelError::new(
                        ModelErrorKind::Config,
                        format!("skill {skill} outside the engine range {lo}..={hi}"),
                    ));
                }
            }
            session.set_option(&cfg.skill_option, &skill.to_string())?;
        }
        for (name, value) in &cfg.options {
            session.set_option(name, value)?;
        }
        session.sync()?;
        Ok(session)
    }

    pub fn send(&mut self, line: &str) -> Result<(), ModelError> {
        writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).map_err(|e| engine_err(format!("write failed: {e}")))
    }

    pub fn set_option(&mut self, name: &str, value: &str) -> Result<(), ModelError> {
        self.send(&format!("setoption name {name} value {value}"))
    }

    pub fn sync(&mut self) -> Result<(), ModelError> {
        self.send("isready")?;
        self.read_until(|l| l == "readyok").map(|_| ())
    }

    pub fn new_game(&mut self) -> Result<(), ModelError> {
        self.send("ucinewgame")?;
        self.sync()
    }

    fn read_until(&mut self, done: impl Fn(&str) -> bool) -> Result<Vec<String>, ModelError> {
        let deadline = Instant::now() + self.timeout;
        let mut out = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) => {
                    let line = line.trim().to_string();
                    let finished = done(&line);
                    out.push(line);
                    if finished {
                        return Ok(out);
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ModelError::new(ModelErrorKind::Timeout, "engine did not answer in time"))
                }
                Err(RecvTimeoutError::Disconnected) => return Err(engine_err("engine exited")),
            }
        }
    }

    pub fn search(&mut self, board: &BoardState, limit: SearchLimit) -> Result<SearchResult, ModelError> {
        self.send(&format!("position fen {}", render_fen(board)))?;
        self.send(&limit.go_command())?;
        self.searches += 1;
        let lines = self.read_until(|l| l.starts_with("bestmove"))?;
        let score = lines.iter().rev().find_map(|l| parse_info_score(l));
        let last = lines.last().expect("read_until returns the terminating line");
        let text = last.split_whitespace().nth(1).unwrap_or("").to_string();
        let best_move = match text.as_str() {
            "(none)" | "0000" | "" => None,
            t => Some(t.parse::<MoveUci>().map_err(|_| engine_err(format!("unparsable bestmove '{t}'")))?),
        };
        Ok(SearchResult { score, best_move, bestmove_text: text })
    }

    /// Number of `go` commands issued so far.
    pub fn searches(&self) -> u64 {
        self.searches
    }
}

impl Drop for EngineSession {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "quit");
        let _ = self.stdin.flush();
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Reads `score cp N` or `score mate N` from an `info` line.
pub fn parse_info_score(line: &str) -> Option<RawScore> {
    let mut tokens = line.split_whitespace();
    if tokens.next()? != "info" {
        return None;
    }
    while let Some(t) = tokens.next() {
        if t == "score" {
            let kind = tokens.next()?;
            let value: i32 = tokens.next()?.parse().ok()?;
            return match kind {
                "cp" => Some(RawScore::Cp(value)),
                "mate" => Some(RawScore::Mate(value)),
                _ => None,
            };
        }
    }
    None
}

fn spin_range(intro: &[String], option: &str) -> Option<(u32, u32)> {
    let prefix = format!("option name {option} type spin");
    let line = intro.iter().find(|l| l.starts_with(&prefix))?;
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let value_after = |key: &str| tokens.iter().position(|t| *t == key).and_then(|i| tokens.get(i + 1)?.parse().ok());
    Some((value_after("min")?, value_after("max")?))
}

/// Opponent that asks a UCI engine for every move.
pub struct EnginePlayer {
    session: EngineSession,
    limit: SearchLimit,
    label: String,
}

impl EnginePlayer {
    pub fn start(cfg: &EngineConfig) -> Result<Self, ModelError> {
        let mut session = EngineSession::start(cfg)?;
        session.new_game()?;
        let label = match cfg.skill {
            Some(s) => format!("engine(skill {s})"),
            None => "engine".to_string(),
        };
        Ok(EnginePlayer { session, limit: cfg.limit, label })
    }
}

/// Asks the engine for a move and checks that it is legal.
pub fn engine_move(board: &BoardState, session: &mut EngineSession, limit: SearchLimit) -> Result<MoveUci, ModelError> {
    let result = session.search(board, limit)?;
    let m = result.best_move.ok_or_else(|| engine_err("engine returned no move"))?;
    if !is_legal(board, m) {
        return Err(engine_err(format!("engine move '{m}' is illegal in {}", render_fen(board))));
    }
    Ok(m)
}

impl MovePlayer for EnginePlayer {
    fn choose_move(&mut self, board: &BoardState, _: &[MoveUci]) -> Result<MoveUci, ModelError> {
        engine_move(board, &mut self.session, self.limit)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
