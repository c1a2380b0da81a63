//! A UCI engine that answers from a JSON script instead of searching.
//!
//! Usage: `scripted-uci SCRIPT.json`
//!
//! ```json
//! {
//!   "default_score": "cp 0",
//!   "positions": {
//!     "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq": { "score": "cp -30", "bestmove": "e7e5" }
//!   },
//!   "exit_after_searches": 10,
//!   "delay_ms": 0,
//!   "search_log": "/tmp/searches.txt"
//! }
//! ```
//!
//! Positions are keyed by the first four FEN fields. Unscripted positions get
//! the default score and the first legal move; positions without legal moves
//! answer `mate 0` or `cp 0` with `bestmove (none)`.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use agentchess_rules::{apply_uci, in_check, legal_moves, parse_fen, render_fen, BoardState};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Entry {
    #[serde(default)]
    score: Option<String>,
    #[serde(default)]
    bestmove: Option<String>,
}

fn d_score() -> String {
    "cp 0".to_string()
}

#[derive(Debug, Deserialize)]
struct Script {
    #[serde(default = "d_score")]
    default_score: String,
    #[serde(default)]
    positions: HashMap<String, Entry>,
    #[serde(default)]
    exit_after_searches: Option<u64>,
    #[serde(default)]
    delay_ms: u64,
    #[serde(default)]
    search_log: Option<String>,
}

fn position_key(board: &BoardState) -> String {
    render_fen(board).split(' ').take(4).collect::<Vec<_>>().join(" ")
}

fn parse_position(args: &[&str]) -> Option<BoardState> {
    let (mut board, rest) = match args.first()? {
        &"startpos" => (BoardState::starting_position(), &args[1..]),
        &"fen" => {
            let end = args.iter().position(|t| *t == "moves").unwrap_or(args.len());
            (parse_fen(&args[1..end].join(" ")).ok()?, &args[end..])
        }
        _ => return None,
    };
    if rest.first() == Some(&"moves") {
        for m in &rest[1..] {
            board = apply_uci(&board, m).ok()?.1;
        }
    }
    Some(board)
}

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: scripted-uci SCRIPT.json");
        return ExitCode::from(2);
    };
    let script: Script = match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| {
        serde_json::from_str(&t).map_err(|e| e.to_string())
    }) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("scripted-uci: {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let mut log = script.search_log.as_ref().and_then(|p| OpenOptions::new().create(true).append(true).open(p).ok());

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut board = BoardState::starting_position();
    let mut searches = 0u64;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let reply = match tokens.first().copied() {
            Some("uci") => "id name scripted-uci\noption name Skill type spin default 20 min 0 max 20\nuciok".to_string(),
            Some("isready") => "readyok".to_string(),
            Some("position") => {
                match parse_position(&tokens[1..]) {
                    Some(b) => board = b,
                    None => eprintln!("scripted-uci: bad position command: {line}"),
                }
                continue;
            }
            Some("go") => {
                if script.exit_after_searches.is_some_and(|n| searches >= n) {
                    return ExitCode::from(1);
                }
                searches += 1;
                if let Some(f) = log.as_mut() {
                    let _ = writeln!(f, "{}", render_fen(&board));
                }
                if script.delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(script.delay_ms));
                }
                let entry = script.positions.get(&position_key(&board));
                let legal = legal_moves(&board);
                let (score, best) = if legal.is_empty() {
                    (if in_check(&board, board.side_to_move()) { "mate 0".to_string() } else { "cp 0".to_string() }, "(none)".to_string())
                } else {
                    (
                        entry.and_then(|e| e.score.clone()).unwrap_or_else(|| script.default_score.clone()),
                        entry.and_then(|e| e.bestmove.clone()).unwrap_or_else(|| legal[0].to_string()),
                    )
                };
                format!("info depth 1 score {score} pv {best}\nbestmove {best}")
            }
            Some("quit") => break,
            _ => continue,
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
