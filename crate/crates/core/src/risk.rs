//! Six-factor fall-risk scoring with linear threshold scores and a risky
//! reference template.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{DailyProfile, FeatureSchema};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("factor configuration incomplete: {0}")]
    ConfigIncomplete(String),
}

/// Risk factors in radar axis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskFactor {
    Sleep,
    SleepDisturbances,
    RoomTransitions,
    Activity,
    Wandering,
    Toilet,
}

impl RiskFactor {
    pub const ALL: [RiskFactor; 6] = [
        RiskFactor::Sleep,
        RiskFactor::SleepDisturbances,
        RiskFactor::RoomTransitions,
        RiskFactor::Activity,
        RiskFactor::Wandering,
        RiskFactor::Toilet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskFactor::Sleep => "Sleep",
            RiskFactor::SleepDisturbances => "SleepDisturbances",
            RiskFactor::RoomTransitions => "RoomTransitions",
            RiskFactor::Activity => "Activity",
            RiskFactor::Wandering => "Wandering",
            RiskFactor::Toilet => "Toilet",
        }
    }

    /// Human-readable axis label.
    pub fn label(self) -> &'static str {
        match self {
            RiskFactor::Sleep => "Sleep",
            RiskFactor::SleepDisturbances => "Sleep Disturbances",
            RiskFactor::RoomTransitions => "Room Transitions",
            RiskFactor::Activity => "Activity",
            RiskFactor::Wandering => "Wandering",
            RiskFactor::Toilet => "Toilet",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RiskFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RiskFactor::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown risk factor `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    IncreasingRisk,
    DecreasingRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub factor: RiskFactor,
    pub feature: String,
    pub lower: f64,
    pub upper: f64,
    pub direction: Direction,
}

impl FactorConfig {
    pub fn problems(&self, schema: &FeatureSchema) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lower < self.upper) {
            out.push(format!(
                "lower ({}) must be below upper ({})",
                self.lower, self.upper
            ));
        }
        if schema.get(&self.feature).is_none() {
            out.push(format!("source feature `{}` is not in the schema", self.feature));
        }
        out
    }
}

pub fn factor_score(x: f64, cfg: &FactorConfig) -> f64 {
    let t = ((x - cfg.lower) / (cfg.upper - cfg.lower)).clamp(0.0, 1.0);
    match cfg.direction {
        Direction::IncreasingRisk => t,
        Direction::DecreasingRisk => 1.0 - t,
    }
}

pub type FactorScores = BTreeMap<RiskFactor, Option<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub resident: String,
    pub date: NaiveDate,
    pub scores: FactorScores,
    pub flags: BTreeSet<RiskFactor>,
}

impl RiskProfile {
    /// Scores in axis order.
    pub fn axis_scores(&self) -> [Option<f64>; 6] {
        RiskFactor::ALL.map(|f| self.scores.get(&f).copied().flatten())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskyTemplate {
    pub scores: BTreeMap<RiskFactor, f64>,
    pub provenance: String,
    /// Flag only scores strictly above the template.
    #[serde(default)]
    pub strict: bool,
}

impl RiskyTemplate {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in RiskFactor::ALL {
            match self.scores.get(&f) {
                None => out.push(format!("missing score for {f}")),
                Some(v) if !(0.0..=1.0).contains(v) => {
                    out.push(format!("score for {f} ({v}) outside [0, 1]"))
                }
                _ => {}
            }
        }
        out
    }

    pub fn axis_scores(&self) -> [Option<f64>; 6] {
        RiskFactor::ALL.map(|f| self.scores.get(&f).copied())
    }
}

fn factor_index(configs: &[FactorConfig]) -> Result<BTreeMap<RiskFactor, &FactorConfig>, RiskError> {
    let mut out = BTreeMap::new();
    for c in configs {
        if out.insert(c.factor, c).is_some() {
            return Err(RiskError::ConfigIncomplete(format!("{} configured twice", c.factor)));
        }
    }
    if let Some(missing) = RiskFactor::ALL.iter().find(|f| !out.contains_key(f)) {
        return Err(RiskError::ConfigIncomplete(format!("{missing} not configured")));
    }
    Ok(out)
}

pub fn score_profile(profile: &DailyProfile, configs: &[FactorConfig]) -> Result<RiskProfile, RiskError> {
    let index = factor_index(configs)?;
    let scores = index
        .into_iter()
        .map(|(f, c)| (f, profile.get(&c.feature).map(|x| factor_score(x, c))))
        .collect();
    Ok(RiskProfile {
        resident: profile.resident_id.clone(),
        date: profile.date,
        scores,
        flags: BTreeSet::new(),
    })
}

pub fn compare_to_template(risk: &RiskProfile, template: &RiskyTemplate) -> RiskProfile {
    let flags = risk
        .scores
        .iter()
        .filter_map(|(f, s)| {
            let (s, t) = ((*s)?, *template.scores.get(f)?);
            let hit = if template.strict { s > t } else { s >= t };
            hit.then_some(*f)
        })
        .collect();
    RiskProfile {
        flags,
        ..risk.clone()
    }
}

pub fn score_series(
    profiles: &[DailyProfile],
    configs: &[FactorConfig],
    template: &RiskyTemplate,
) -> Result<Vec<RiskProfile>, RiskError> {
    profiles
        .iter()
        .map(|p| score_profile(p, configs).map(|r| compare_to_template(&r, template)))
        .collect()
}
