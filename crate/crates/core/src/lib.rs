//! Match harness for chat-completion agents playing chess through a
//! three-action dialog, with move-quality analysis, Elo estimation and
//! leaderboard reporting.

pub mod agent;
pub mod analysis;
pub mod cli;
pub mod dialog;
pub mod elo;
pub mod manifest;
pub mod match_runner;
pub mod players;
pub mod report;
pub mod storage;
