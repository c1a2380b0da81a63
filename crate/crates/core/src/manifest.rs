//! Run manifests: one TOML file describing a grid of match sets.
//!
//! ```toml
//! games = 30
//! parallelism = 4
//! seed = 0
//! out = "runs/example"
//! variant = "baseline"
//! opponent_skills = [1, 2, 3]
//!
//! [[subjects]]
//! kind = "llm"
//! base_url = "https://api.example.com/v1"
//! model = "some-model"
//! api_key_env = "EXAMPLE_API_KEY"
//!
//! [opponent]
//! kind = "engine"
//! path = "/usr/local/bin/stockfish"
//! ```

use std::path::{Path, PathBuf};

use agentchess_rules::Color;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisEngineConfig;
use crate::dialog::{DialogLimits, ProtocolVariant};
use crate::elo::SkillRatingMap;
use crate::match_runner::{ErrorPolicy, GameConfig, GameConfigError};
use crate::players::PlayerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantSpec {
    Preset(String),
    Custom(ProtocolVariant),
}

impl Default for VariantSpec {
    fn default() -> Self {
        VariantSpec::Preset("baseline".to_string())
    }
}

impl VariantSpec {
    pub fn resolve(&self) -> Result<ProtocolVariant, ManifestError> {
        match self {
            VariantSpec::Preset(name) => ProtocolVariant::preset(name).map_err(|e| ManifestError::Invalid(e.to_string())),
            VariantSpec::Custom(v) => Ok(*v),
        }
    }
}

fn d_games() -> u64 {
    30
}
fn d_parallelism() -> usize {
    1
}
fn d_out() -> PathBuf {
    PathBuf::from("runs")
}
fn black() -> Color {
    Color::Black
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subjects: Vec<PlayerSpec>,
    pub opponent: PlayerSpec,
    /// Engine skill levels to play; each level is its own match set.
    #[serde(default)]
    pub opponent_skills: Vec<u32>,
    #[serde(default = "black")]
    pub subject_color: Color,
    #[serde(default = "d_games")]
    pub games: u64,
    #[serde(default)]
    pub limits: DialogLimits,
    #[serde(default)]
    pub variant: VariantSpec,
    /// Defaults to counting model errors as losses against engines and
    /// excluding them otherwise.
    #[serde(default)]
    pub error_policy: Option<ErrorPolicy>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
    #[serde(default = "d_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub start_fen: Option<String>,
    #[serde(default)]
    pub analysis: Option<AnalysisEngineConfig>,
    #[serde(default)]
    pub elo: SkillRatingMap,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{cell}: {source}")]
    Cell { cell: String, source: GameConfigError },
}

/// Command-line values that replace manifest entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub games: Option<u64>,
    pub skills: Option<Vec<u32>>,
    pub variant: Option<String>,
}

/// One match set of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub config: GameConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| ManifestError::Parse { path: path.into(), message: e.to_string() })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.parallelism {
            self.parallelism = v;
        }
        if let Some(v) = o.games {
            self.games = v;
        }
        if let Some(v) = &o.skills {
            self.opponent_skills = v.clone();
        }
        if let Some(v) = &o.variant {
            self.variant = VariantSpec::Preset(v.clone());
        }
    }

    pub fn error_policy(&self) -> ErrorPolicy {
        self.error_policy.unwrap_or(match self.opponent {
            PlayerSpec::Engine(_) => ErrorPolicy::CountModelErrorsAsLoss,
            _ => ErrorPolicy::ExcludeModelErrors,
        })
    }

    /// Expands the grid and validates every cell before anything runs.
    pub fn cells(&self) -> Result<Vec<Cell>, ManifestError> {
        if self.games == 0 {
            return Err(ManifestError::Invalid("games must be at least 1".into()));
        }
        if self.subjects.is_empty() {
            return Err(ManifestError::Invalid("no subjects configured".into()));
        }
        if !self.opponent_skills.is_empty() && !matches!(self.opponent, PlayerSpec::Engine(_)) {
            return Err(ManifestError::Invalid("opponent_skills needs an engine opponent".into()));
        }
        let variant = self.variant.resolve()?;
        let opponents: Vec<PlayerSpec> = match &self.opponent {
            PlayerSpec::Engine(e) if !self.opponent_skills.is_empty() => self
                .opponent_skills
                .iter()
                .map(|&s| {
                    let mut e = e.clone();
                    e.skill = Some(s);
                    PlayerSpec::Engine(e)
                })
                .collect(),
            other => vec![other.clone()],
        };
        let mut cells = Vec::new();
        for subject in &self.subjects {
            for opponent in &opponents {
                let (white, black) = match self.subject_color {
                    Color::White => (subject.clone(), opponent.clone()),
                    Color::Black => (opponent.clone(), subject.clone()),
                };
                let config = GameConfig {
                    subject: self.subject_color,
                    limits: self.limits,
                    variant,
                    seed: self.seed,
                    error_policy: self.error_policy(),
                    start_fen: self.start_fen.clone(),
                    ..GameConfig::new(white, black)
                };
                let name = format!("{} vs {}", subject.label(), opponent.label());
                config.validate().map_err(|source| ManifestError::Cell { cell: name.clone(), source })?;
                cells.push(Cell { name, config });
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
games = 4
opponent_skills = [1, 2]

[[subjects]]
kind = "protocol_bot"

[[subjects]]
kind = "scripted_replies"
replies = ["make_move e7e5"]

[opponent]
kind = "engine"
path = "/bin/sh"
"#;

    #[test]
    fn grid_expansion() {
        let m: RunManifest = toml::from_str(TEXT).unwrap();
        assert_eq!(m.error_policy(), ErrorPolicy::CountModelErrorsAsLoss);
        let cells = m.cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1].name, "protocol-bot vs engine(skill 2)");
        assert_eq!(cells[0].config.white.engine_skill(), Some(1));
        assert_eq!(cells[0].config.subject, Color::Black);
    }

    #[test]
    fn overrides_win() {
        let mut m: RunManifest = toml::from_str(TEXT).unwrap();
        m.apply(&Overrides {
            games: Some(7),
            skills: Some(vec![5]),
            variant: Some("only_make_move".into()),
            ..Default::default()
        });
        assert_eq!(m.games, 7);
        let cells = m.cells().unwrap();
        assert_eq!(cells.len(), 2);
        assert!(!cells[0].config.variant.offer_get_board);
        m.apply(&Overrides { variant: Some("nope".into()), ..Default::default() });
        assert!(m.cells().is_err());
    }

    #[test]
    fn missing_engine_is_rejected() {
        let mut m: RunManifest = toml::from_str(TEXT).unwrap();
        m.opponent = toml::from_str("kind = \"engine\"\npath = \"/definitely/not/here\"").unwrap();
        assert!(matches!(m.cells(), Err(ManifestError::Cell { .. })));
    }
}
