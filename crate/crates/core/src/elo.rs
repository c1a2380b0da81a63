//! Maximum-likelihood Elo estimation against fixed-rated opponents.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::match_runner::{score, ErrorPolicy, GameRecord, SubjectResult};

pub const WHITE_ADVANTAGE: f64 = 35.0;
pub const BRACKET_MARGIN: f64 = 400.0;
pub const ROOT_TOLERANCE: f64 = 1e-4;
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub opponent_rating: f64,
    pub score: f64,
}

impl MatchOutcome {
    pub fn new(opponent_rating: f64, score: f64) -> Result<Self, EloError> {
        if !opponent_rating.is_finite() {
            return Err(EloError::BadRating(opponent_rating));
        }
        if ![0.0, 0.5, 1.0].contains(&score) {
            return Err(EloError::BadScore(score));
        }
        Ok(MatchOutcome { opponent_rating, score })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlag {
    #[default]
    None,
    ClampedLow,
    ClampedHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloEstimate {
    /// Root of the score equation plus the white-advantage offset.
    pub rating: f64,
    pub se: f64,
    /// Half-width of the 95% interval.
    pub me: f64,
    pub white_advantage: f64,
    pub boundary_flag: BoundaryFlag,
    pub games: usize,
}

impl EloEstimate {
    pub fn ci(&self) -> (f64, f64) {
        (self.rating - self.me, self.rating + self.me)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EloError {
    #[error("no outcomes to estimate from")]
    Empty,
    #[error("score must be 0, 0.5 or 1, got {0}")]
    BadScore(f64),
    #[error("opponent rating must be finite, got {0}")]
    BadRating(f64),
    #[error("game {0}: opponent has no engine skill level")]
    MissingSkill(u64),
    #[error("no rating known for skill level {0}")]
    UnknownSkill(u32),
    #[error("skill ratings must increase with skill")]
    NotIncreasing,
    #[error("outcome csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

pub fn expected_score(r: f64, opponent: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((opponent - r) / 400.0))
}

/// Σ (S_i − E_i(r)); strictly decreasing in r.
pub fn score_diff(outcomes: &[MatchOutcome], r: f64) -> f64 {
    outcomes.iter().map(|o| o.score - expected_score(r, o.opponent_rating)).sum()
}

pub fn fisher_information(outcomes: &[MatchOutcome], r: f64) -> f64 {
    let k = std::f64::consts::LN_10 / 400.0;
    outcomes
        .iter()
        .map(|o| {
            let e = expected_score(r, o.opponent_rating);
            e * (1.0 - e) * k * k
        })
        .sum()
}

pub fn estimate_elo(outcomes: &[MatchOutcome], white_advantage: f64) -> Result<EloEstimate, EloError> {
    if outcomes.is_empty() {
        return Err(EloError::Empty);
    }
    let min = outcomes.iter().map(|o| o.opponent_rating).fold(f64::INFINITY, f64::min);
    let max = outcomes.iter().map(|o| o.opponent_rating).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (min - BRACKET_MARGIN, max + BRACKET_MARGIN);
    let (f_lo, f_hi) = (score_diff(outcomes, lo), score_diff(outcomes, hi));

    let (root, boundary_flag) = if f_lo <= 0.0 {
        (lo, BoundaryFlag::ClampedLow)
    } else if f_hi >= 0.0 {
        (hi, BoundaryFlag::ClampedHigh)
    } else {
        while hi - lo > ROOT_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if score_diff(outcomes, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), BoundaryFlag::None)
    };
    let se = 1.0 / fisher_information(outcomes, root).sqrt();
    Ok(EloEstimate {
        rating: root + white_advantage,
        se,
        me: Z95 * se,
        white_advantage,
        boundary_flag,
        games: outcomes.len(),
    })
}

/// Anchor rating per engine skill level. Explicit entries win over the
/// linear default `base + step·(skill − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRatingMap {
    #[serde(default = "d_base")]
    pub base: f64,
    #[serde(default = "d_step")]
    pub step: f64,
    #[serde(default)]
    pub table: BTreeMap<u32, f64>,
}

fn d_base() -> f64 {
    250.0
}
fn d_step() -> f64 {
    125.0
}

impl Default for SkillRatingMap {
    fn default() -> Self {
        SkillRatingMap { base: d_base(), step: d_step(), table: BTreeMap::new() }
    }
}

impl SkillRatingMap {
    pub fn from_table(table: BTreeMap<u32, f64>) -> Result<Self, EloError> {
        let m = SkillRatingMap { table, ..Default::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EloError> {
        if self.table.is_empty() && self.step <= 0.0 {
            return Err(EloError::NotIncreasing);
        }
        if self.table.values().zip(self.table.values().skip(1)).any(|(a, b)| b <= a) {
            return Err(EloError::NotIncreasing);
        }
        Ok(())
    }

    pub fn rating(&self, skill: u32) -> Result<f64, EloError> {
        if let Some(r) = self.table.get(&skill) {
            return Ok(*r);
        }
        if !self.table.is_empty() || skill == 0 {
            return Err(EloError::UnknownSkill(skill));
        }
        Ok(self.base + self.step * (skill as f64 - 1.0))
    }
}

/// Outcomes of the subject against rated engine opponents. Subject model
/// errors count as losses here whatever policy the games were scored with;
/// games lost to opponent failures carry no information and are skipped.
pub fn outcomes_from_records(records: &[GameRecord], map: &SkillRatingMap) -> Result<Vec<MatchOutcome>, EloError> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let skill = r.config.spec(r.subject().opposite()).engine_skill().ok_or(EloError::MissingSkill(r.index))?;
        let rating = map.rating(skill)?;
        let result = score(&r.termination, r.subject(), ErrorPolicy::CountModelErrorsAsLoss);
        let s = match result {
            SubjectResult::Win => 1.0,
            SubjectResult::Draw => 0.5,
            SubjectResult::Loss => 0.0,
            SubjectResult::Excluded => continue,
        };
        out.push(MatchOutcome::new(rating, s)?);
    }
    Ok(out)
}

/// Outcome lists in `opponent_rating,score` form; a header row is optional.
pub fn read_outcomes_csv(reader: impl Read) -> Result<Vec<MatchOutcome>, EloError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let bad = |message: String| EloError::Csv { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let (Ok(r), Ok(s)) = (rec[0].parse::<f64>(), rec[1].parse::<f64>()) else {
            if i == 0 {
                continue;
            }
            return Err(bad(format!("not a number pair: {},{}", &rec[0], &rec[1])));
        };
        out.push(MatchOutcome::new(r, s).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_outcomes_csv(outcomes: &[MatchOutcome], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["opponent_rating", "score"])?;
    for o in outcomes {
        w.write_record([o.opponent_rating.to_string(), o.score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Expands per-opponent (wins, draws, losses) counts into outcomes.
pub fn outcomes_from_counts(rows: &[(f64, u32, u32, u32)]) -> Vec<MatchOutcome> {
    let mut out = Vec::new();
    for &(rating, w, d, l) in rows {
        for (n, s) in [(w, 1.0), (d, 0.5), (l, 0.0)] {
            out.extend((0..n).map(|_| MatchOutcome { opponent_rating: rating, score: s }));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(r: f64, s: f64) -> MatchOutcome {
        MatchOutcome::new(r, s).unwrap()
    }

    #[test]
    fn expected_score_values() {
        assert_eq!(expected_score(500.0, 500.0), 0.5);
        assert!((expected_score(800.0, 400.0) - 10.0 / 11.0).abs() < 1e-12);
        assert!((expected_score(123.0, 987.0) + expected_score(987.0, 123.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair() {
        let e = estimate_elo(&[o(400.0, 1.0), o(400.0, 0.0)], WHITE_ADVANTAGE).unwrap();
        assert!((e.rating - 435.0).abs() < 1e-3);
        assert_eq!(e.boundary_flag, BoundaryFlag::None);
        assert!((e.me - 1.96 * e.se).abs() < 1e-12);
    }

    #[test]
    fn draws_and_se_scaling() {
        let one = estimate_elo(&[o(500.0, 0.5)], 35.0).unwrap();
        let many = estimate_elo(&vec![o(500.0, 0.5); 16], 35.0).unwrap();
        assert!((one.rating - 535.0).abs() < 1e-3 && (many.rating - 535.0).abs() < 1e-3);
        assert!((one.se / many.se - 4.0).abs() < 1e-6);
        // I = 0.25·(ln10/400)² at the root.
        let k = std::f64::consts::LN_10 / 400.0;
        assert!((one.se - 1.0 / (0.25 * k * k).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn clamping() {
        let e = estimate_elo(&[o(250.0, 1.0), o(750.0, 1.0)], 35.0).unwrap();
        assert_eq!(e.boundary_flag, BoundaryFlag::ClampedHigh);
        assert_eq!(e.rating, 750.0 + 400.0 + 35.0);
        let e = estimate_elo(&[o(250.0, 0.0)], 35.0).unwrap();
        assert_eq!(e.boundary_flag, BoundaryFlag::ClampedLow);
        assert_eq!(e.rating, -150.0 + 35.0);
        assert_eq!(estimate_elo(&[], 35.0), Err(EloError::Empty));
    }

    #[test]
    fn translation_equivariance() {
        let base = [o(300.0, 1.0), o(500.0, 0.5), o(700.0, 0.0), o(400.0, 1.0)];
        let shifted: Vec<_> = base.iter().map(|x| o(x.opponent_rating + 1234.0, x.score)).collect();
        let a = estimate_elo(&base, 0.0).unwrap();
        let b = estimate_elo(&shifted, 0.0).unwrap();
        assert!((b.rating - a.rating - 1234.0).abs() < 1e-3);
    }

    #[test]
    fn skill_map() {
        let m = SkillRatingMap::default();
        assert_eq!(m.rating(1).unwrap(), 250.0);
        assert_eq!(m.rating(2).unwrap(), 375.0);
        assert_eq!(m.rating(10).unwrap(), 1375.0);
        let t = SkillRatingMap::from_table([(1, 300.0), (2, 420.0)].into()).unwrap();
        assert_eq!(t.rating(2).unwrap(), 420.0);
        assert_eq!(t.rating(3), Err(EloError::UnknownSkill(3)));
        assert_eq!(SkillRatingMap::from_table([(1, 300.0), (2, 200.0)].into()), Err(EloError::NotIncreasing));
    }

    #[test]
    fn csv_round_trip() {
        let v = vec![o(400.0, 1.0), o(400.0, 0.0), o(525.5, 0.5)];
        let mut buf = Vec::new();
        write_outcomes_csv(&v, &mut buf).unwrap();
        assert_eq!(read_outcomes_csv(&buf[..]).unwrap(), v);
        assert_eq!(read_outcomes_csv("400,1\n400,0\n".as_bytes()).unwrap().len(), 2);
        assert!(matches!(read_outcomes_csv("400,1\n400,0.3\n".as_bytes()), Err(EloError::Csv { line: 2, .. })));
    }
}
