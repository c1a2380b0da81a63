mod common;

use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use agentchess_core::storage::load_logs;
use common::{agentchess, engine_script, scripted_engine};
use serde_json::json;

fn run(args: &[&str]) -> Output {
    Command::new(agentchess()).args(args).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("manifest.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn bot_manifest(out: &Path, games: u64, delay_ms: u64, label_seed: &str) -> String {
    format!(
        "games = {games}\nseed = {label_seed}\nout = \"{}\"\n\n[[subjects]]\nkind = \"protocol_bot\"\npick = \"random\"\ndelay_ms = {delay_ms}\n\n[opponent]\nkind = \"random\"\n",
        out.display()
    )
}

#[test]
fn run_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), &bot_manifest(&out, 5, 0, "0"));
    let o = run(&["run", "--config", &m, "--parallelism", "2"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("protocol-bot vs random: 5 games"), "{stdout}");
    assert!(stdout.contains("Win/Loss"));
    assert_eq!(text(&o.stderr).lines().filter(|l| l.starts_with("game ")).count(), 5);
    let loaded = load_logs(&[out.join("games.jsonl")]).unwrap();
    assert_eq!(loaded.entries.len(), 5);
    assert!(loaded.diagnostics.is_empty());
}

#[test]
fn flags_override_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &bot_manifest(&dir.path().join("a"), 5, 0, "0"));
    let other = dir.path().join("b");
    let o = run(&["run", "--config", &m, "--games", "2", "--out", other.to_str().unwrap(), "--variant", "fen_board", "--quiet"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let loaded = load_logs(&[other.join("games.jsonl")]).unwrap();
    assert_eq!(loaded.entries.len(), 2);
    assert_eq!(loaded.entries[0].record.config.variant.board_style.to_string(), "fen");
    assert!(!dir.path().join("a").exists());
}

#[test]
fn missing_engine_fails_before_any_game() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        "games = 3\nout = \"{}\"\nopponent_skills = [1]\n\n[[subjects]]\nkind = \"protocol_bot\"\n\n[opponent]\nkind = \"engine\"\npath = \"/no/such/engine\"\n",
        out.display()
    );
    let m = write_manifest(dir.path(), &body);
    let o = run(&["run", "--config", &m]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("engine not found"), "{}", text(&o.stderr));
    assert!(!out.join("games.jsonl").exists());
}

#[test]
fn interrupted_run_keeps_finished_games() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), &bot_manifest(&out, 10, 4, "0"));
    let mut child = Command::new(agentchess())
        .args(["run", "--config", &m, "--quiet"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let log = out.join("games.jsonl");
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let n = std::fs::read_to_string(&log).map(|t| t.matches('\n').count()).unwrap_or(0);
        if n >= 3 {
            break;
        }
        assert!(Instant::now() < deadline, "run too slow");
        std::thread::sleep(Duration::from_millis(2));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let loaded = load_logs(&[log]).unwrap();
    assert!(loaded.diagnostics.is_empty(), "{:?}", loaded.diagnostics);
    assert!((3..10).contains(&loaded.entries.len()), "{}", loaded.entries.len());
    let idx: Vec<u64> = loaded.entries.iter().map(|e| e.record.index).collect();
    assert_eq!(idx, (0..idx.len() as u64).collect::<Vec<_>>());
}

#[test]
fn report_two_models_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let body = format!(
        "games = 4\nout = \"{}\"\n\n[[subjects]]\nkind = \"protocol_bot\"\n\n[[subjects]]\nkind = \"scripted_replies\"\nreplies = [\"banana\"]\n\n[opponent]\nkind = \"random\"\n",
        logs.display()
    );
    let m = write_manifest(dir.path(), &body);
    assert!(run(&["run", "--config", &m, "--quiet"]).status.success());

    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    let o = run(&["report", logs.to_str().unwrap(), "--out", r1.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(run(&["report", logs.to_str().unwrap(), "--out", r2.to_str().unwrap()]).status.success());
    let csv = std::fs::read_to_string(r1.join("leaderboard.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().starts_with("scripted,4,4,0,0.0,"), "{csv}");
    for f in ["leaderboard.csv", "leaderboard.md"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap());
    }
}

#[test]
fn report_without_records_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", dir.path().to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("no game records"));
}

#[test]
fn elo_from_outcome_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pair.csv");
    std::fs::write(&csv, "opponent_rating,score\n400,1\n400,0\n").unwrap();
    let rows = dir.path().join("elo.csv");
    let o = run(&["elo", "--outcomes", csv.to_str().unwrap(), "--out", rows.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("Elo 435.0 ± "), "{}", text(&o.stdout));

    let wins = dir.path().join("wins.csv");
    std::fs::write(&wins, "250,1\n375,1\n").unwrap();
    let o = run(&["elo", "--outcomes", wins.to_str().unwrap(), "--out", rows.to_str().unwrap(), "--fail-on-clamp"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stdout).contains("[clamped_high]"));
    let written = std::fs::read_to_string(&rows).unwrap();
    assert_eq!(written.lines().count(), 3);
    assert!(written.lines().nth(1).unwrap().contains(",435.0000,"));
    assert!(written.lines().nth(2).unwrap().ends_with(",clamped_high"));
}

#[test]
fn elo_from_engine_games() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = engine_script(dir.path(), "e.json", &json!({}));
    let body = format!(
        "games = 2\nout = \"{}\"\nopponent_skills = [1, 2]\n\n[[subjects]]\nkind = \"protocol_bot\"\npick = \"random\"\n\n[opponent]\nkind = \"engine\"\npath = \"{}\"\nargs = [\"{}\"]\n\n[elo]\nbase = 300.0\nstep = 100.0\n",
        out.display(),
        scripted_engine().display(),
        args[0]
    );
    let m = write_manifest(dir.path(), &body);
    let o = run(&["run", "--config", &m, "--quiet"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let o = run(&["elo", out.to_str().unwrap(), "--config", &m]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("protocol-bot: Elo "), "{}", text(&o.stdout));
    assert!(text(&o.stdout).contains("4 games"));
}

#[test]
fn elo_needs_engine_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), &bot_manifest(&out, 1, 0, "0"));
    assert!(run(&["run", "--config", &m, "--quiet"]).status.success());
    let o = run(&["elo", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("no engine skill"));
}

#[test]
fn analyze_writes_idempotent_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), &bot_manifest(&out, 2, 0, "3"));
    assert!(run(&["run", "--config", &m, "--quiet"]).status.success());
    let loaded = load_logs(std::slice::from_ref(&out)).unwrap();
    let subject_plys: usize = loaded.entries.iter().map(|e| e.record.subject_moves().count()).sum();

    let script = engine_script(dir.path(), "a.json", &json!({ "default_score": "cp 25" }));
    let manifest_with_engine = format!(
        "{}\n[analysis]\npath = \"{}\"\nargs = [\"{}\"]\n",
        bot_manifest(&out, 2, 0, "3"),
        scripted_engine().display(),
        script[0]
    );
    let m2 = dir.path().join("m2.toml");
    std::fs::write(&m2, manifest_with_engine).unwrap();
    let a = dir.path().join("analysis");
    let args = ["analyze", out.to_str().unwrap(), "--config", m2.to_str().unwrap(), "--out", a.to_str().unwrap(), "--parallelism", "2"];
    let o = run(&args);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let first = std::fs::read(a.join("analysis.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), subject_plys);
    assert!(text(&o.stdout).contains("| protocol-bot | 2 | 0 |"), "{}", text(&o.stdout));
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(a.join("analysis.jsonl")).unwrap(), first);
}

#[test]
fn analyze_without_engine_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", dir.path().to_str().unwrap(), "--out", "x", "--engine", "/no/such/engine"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("analysis engine not found"));
}
