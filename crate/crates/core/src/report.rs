//! Read-only snapshots of processed residents and the JSON/SVG payloads
//! built from them. The HTTP service and the CLI both answer through these
//! functions, so the same inputs give byte-identical bodies.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cbr::{retrieve, self_trend, CaseBase, CbrError};
use crate::config::AppConfig;
use crate::profile::{profile_to_record, DailyProfile};
use crate::radar::{render_radar, render_trend, Colour, RadarSeries, RadarSpec, RenderError};
use crate::risk::{score_series, RiskError, RiskFactor, RiskProfile};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown resident `{0}`")]
    UnknownResident(String),
    #[error("no profile for `{resident}` on {date}")]
    NoProfile { resident: String, date: String },
    #[error("unknown factor `{0}`; expected one of Sleep, SleepDisturbances, RoomTransitions, Activity, Wandering, Toilet")]
    UnknownFactor(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("two profiles for `{resident}` on {date}")]
    DuplicateProfile { resident: String, date: NaiveDate },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Cbr(#[from] CbrError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl ReportError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::UnknownResident(_) => "unknown_resident",
            ReportError::NoProfile { .. } => "no_profile",
            ReportError::UnknownFactor(_) => "unknown_factor",
            ReportError::InvalidParameter(_) => "invalid_parameter",
            ReportError::DuplicateProfile { .. } => "duplicate_profile",
            ReportError::Risk(_) | ReportError::Cbr(_) | ReportError::Render(_) => "internal",
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            ReportError::UnknownResident(_) | ReportError::NoProfile { .. } | ReportError::UnknownFactor(_)
        )
    }

    pub fn body(&self) -> Value {
        json!({ "error": self.code(), "detail": self.to_string() })
    }
}

/// Profiles and risk scores of one resident, sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidentHistory {
    pub profiles: Vec<DailyProfile>,
    pub risks: Vec<RiskProfile>,
}

impl ResidentHistory {
    fn index(&self, resident: &str, date: Option<NaiveDate>) -> Result<usize, ReportError> {
        match date {
            None if !self.profiles.is_empty() => Ok(self.profiles.len() - 1),
            None => Err(ReportError::NoProfile {
                resident: resident.to_string(),
                date: "latest".into(),
            }),
            Some(d) => self
                .profiles
                .binary_search_by_key(&d, |p| p.date)
                .map_err(|_| ReportError::NoProfile {
                    resident: resident.to_string(),
                    date: d.to_string(),
                }),
        }
    }
}

/// Everything a read request can see. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub config: AppConfig,
    pub fingerprint: String,
    pub residents: BTreeMap<String, ResidentHistory>,
    pub casebase: CaseBase,
}

/// Radar overlays besides the resident's own scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlay {
    Risky,
    History,
}

impl std::str::FromStr for Overlay {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "risky" => Ok(Overlay::Risky),
            "history" => Ok(Overlay::History),
            other => Err(ReportError::InvalidParameter(format!(
                "unknown overlay `{other}`; expected risky or history"
            ))),
        }
    }
}

/// Parses a comma-separated overlay list; blank entries are ignored.
pub fn parse_overlays(s: &str) -> Result<Vec<Overlay>, ReportError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

pub fn parse_factor(s: &str) -> Result<RiskFactor, ReportError> {
    s.parse().map_err(|_| ReportError::UnknownFactor(s.to_string()))
}

fn score_value(s: Option<f64>) -> Value {
    s.map_or(Value::Null, Value::from)
}

impl Snapshot {
    pub fn build(config: AppConfig, profiles: Vec<DailyProfile>, casebase: CaseBase) -> Result<Self, ReportError> {
        let mut grouped: BTreeMap<String, Vec<DailyProfile>> = BTreeMap::new();
        for p in profiles {
            grouped.entry(p.resident_id.clone()).or_default().push(p);
        }
        let mut residents = BTreeMap::new();
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(&config).expect("configuration serializes"));
        for (id, mut profiles) in grouped {
            profiles.sort_by_key(|p| p.date);
            if let Some(w) = profiles.windows(2).find(|w| w[0].date == w[1].date) {
                return Err(ReportError::DuplicateProfile {
                    resident: id,
                    date: w[0].date,
                });
            }
            for p in &profiles {
                hasher.update(serde_json::to_string(&profile_to_record(p)).expect("profile serializes"));
            }
            let risks = score_series(&profiles, &config.factors, &config.template)?;
            residents.insert(id, ResidentHistory { profiles, risks });
        }
        hasher.update(casebase.to_json());
        let fingerprint = hex::encode(&hasher.finalize()[..8]);
        Ok(Snapshot {
            config,
            fingerprint,
            residents,
            casebase,
        })
    }

    pub fn resident(&self, id: &str) -> Result<&ResidentHistory, ReportError> {
        self.residents
            .get(id)
            .ok_or_else(|| ReportError::UnknownResident(id.to_string()))
    }

    /// `GET /api/residents`
    pub fn residents_json(&self) -> Value {
        Value::Array(
            self.residents
                .iter()
                .map(|(id, h)| {
                    json!({
                        "resident_id": id,
                        "days_available": h.profiles.len(),
                        "first_date": h.profiles.first().map(|p| p.date.to_string()),
                        "last_date": h.profiles.last().map(|p| p.date.to_string()),
                    })
                })
                .collect(),
        )
    }

    /// `GET /api/residents/{id}/profile`
    pub fn profile_json(&self, id: &str, date: Option<NaiveDate>) -> Result<Value, ReportError> {
        let h = self.resident(id)?;
        let p = &h.profiles[h.index(id, date)?];
        let mut v = serde_json::to_value(profile_to_record(p)).expect("profile serializes");
        v["fingerprint"] = Value::from(self.fingerprint.clone());
        Ok(v)
    }

    /// `GET /api/residents/{id}/risk`
    pub fn risk_json(&self, id: &str, date: Option<NaiveDate>) -> Result<Value, ReportError> {
        let h = self.resident(id)?;
        let i = h.index(id, date)?;
        let (profile, risk) = (&h.profiles[i], &h.risks[i]);
        let scores: serde_json::Map<String, Value> = RiskFactor::ALL
            .iter()
            .map(|f| (f.to_string(), score_value(risk.scores.get(f).copied().flatten())))
            .collect();
        let sources: serde_json::Map<String, Value> = self
            .config
            .factors
            .iter()
            .map(|c| {
                (
                    c.factor.to_string(),
                    json!({
                        "feature": c.feature,
                        "value": score_value(profile.get(&c.feature)),
                        "lower": c.lower,
                        "upper": c.upper,
                        "direction": c.direction,
                    }),
                )
            })
            .collect();
        Ok(json!({
            "resident": id,
            "date": profile.date.to_string(),
            "scores": scores,
            "flags": risk.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            "template": self.config.template,
            "sources": sources,
            "fingerprint": self.fingerprint,
        }))
    }

    /// `GET /api/residents/{id}/similar`
    pub fn similar_json(
        &self,
        id: &str,
        date: Option<NaiveDate>,
        k: Option<i64>,
        exclude_self: bool,
    ) -> Result<Value, ReportError> {
        let k = k.unwrap_or(self.config.similarity.k as i64);
        if k < 1 {
            return Err(ReportError::InvalidParameter(format!("k must be at least 1, got {k}")));
        }
        let h = self.resident(id)?;
        let query = &h.profiles[h.index(id, date)?];
        let exclude = exclude_self.then_some(id);
        let result = retrieve(query, &self.casebase, &self.config.similarity, k as usize, exclude)?;
        Ok(json!({
            "resident": id,
            "date": query.date.to_string(),
            "k": k,
            "exclude_self": exclude_self,
            "neighbours": result.neighbours,
            "recommendation": result.recommendation,
            "vote_score": result.vote_score,
            "fingerprint": self.fingerprint,
        }))
    }

    fn trend_points(&self, id: &str, factor: RiskFactor) -> Result<Vec<(NaiveDate, Option<f64>)>, ReportError> {
        let h = self.resident(id)?;
        Ok(h.risks
            .iter()
            .map(|r| (r.date, r.scores.get(&factor).copied().flatten()))
            .collect())
    }

    /// `GET /api/residents/{id}/trend`
    pub fn trend_json(&self, id: &str, factor: &str) -> Result<Value, ReportError> {
        let h = self.resident(id)?;
        let factor = parse_factor(factor)?;
        let feature = self.config.factor(factor).map(|c| c.feature.clone());
        let points: Vec<Value> = self
            .trend_points(id, factor)?
            .into_iter()
            .zip(&h.risks)
            .map(|((date, score), r)| {
                json!({
                    "date": date.to_string(),
                    "score": score_value(score),
                    "flagged": r.flags.contains(&factor),
                })
            })
            .collect();
        Ok(json!({
            "resident": id,
            "factor": factor.to_string(),
            "feature": feature,
            "template_level": self.config.template.scores.get(&factor),
            "points": points,
            "fingerprint": self.fingerprint,
        }))
    }

    /// `GET /api/residents/{id}/trend.svg`
    pub fn trend_svg(&self, id: &str, factor: &str) -> Result<String, ReportError> {
        let factor = parse_factor(factor)?;
        let points = self.trend_points(id, factor)?;
        if points.is_empty() {
            return Err(ReportError::NoProfile {
                resident: id.to_string(),
                date: "any".into(),
            });
        }
        Ok(render_trend(&points, factor, self.config.template.scores.get(&factor).copied())?)
    }

    /// `GET /api/residents/{id}/self-similarity`
    pub fn self_similarity_json(&self, id: &str, window: Option<i64>) -> Result<Value, ReportError> {
        let window = window.unwrap_or(self.config.similarity.trend_window as i64);
        if window < 1 {
            return Err(ReportError::InvalidParameter(format!("window must be at least 1, got {window}")));
        }
        let h = self.resident(id)?;
        let ranges = self.casebase.similarity_ranges();
        let points = self_trend(
            &h.profiles,
            window as usize,
            &self.casebase.schema,
            &self.config.similarity,
            &ranges,
        )?;
        Ok(json!({
            "resident": id,
            "window": window,
            "threshold": self.config.similarity.trend_threshold,
            "points": points,
            "fingerprint": self.fingerprint,
        }))
    }

    /// Radar of one day with optional overlays.
    pub fn radar_spec(&self, id: &str, date: Option<NaiveDate>, overlays: &[Overlay]) -> Result<RadarSpec, ReportError> {
        let h = self.resident(id)?;
        let i = h.index(id, date)?;
        let risk = &h.risks[i];
        let mut series = vec![RadarSeries {
            label: format!("{id} {}", risk.date),
            scores: risk.axis_scores(),
            colour: Colour::Resident,
            fill_opacity: 0.35,
        }];
        if overlays.contains(&Overlay::Risky) {
            series.push(RadarSeries {
                label: "Risky template".into(),
                scores: self.config.template.axis_scores(),
                colour: Colour::Risky,
                fill_opacity: 0.15,
            });
        }
        if overlays.contains(&Overlay::History) {
            let days = self.config.service.history_days;
            let prior = &h.risks[i.saturating_sub(days)..i];
            if let Some(mean) = mean_scores(prior) {
                series.push(RadarSeries {
                    label: format!("{days}-day mean"),
                    scores: mean,
                    colour: Colour::Historical,
                    fill_opacity: 0.1,
                });
            }
        }
        let mut spec = RadarSpec::new(series);
        spec.emphasis = risk.flags.iter().copied().collect();
        Ok(spec)
    }

    /// `GET /api/residents/{id}/radar.svg`
    pub fn radar_svg(&self, id: &str, date: Option<NaiveDate>, overlays: &[Overlay]) -> Result<String, ReportError> {
        Ok(render_radar(&self.radar_spec(id, date, overlays)?)?)
    }
}

/// Per-axis mean over the days that have a score; `None` when `risks` is
/// empty.
pub fn mean_scores(risks: &[RiskProfile]) -> Option<[Option<f64>; 6]> {
    if risks.is_empty() {
        return None;
    }
    Some(RiskFactor::ALL.map(|f| {
        let values: Vec<f64> = risks
            .iter()
            .filter_map(|r| r.scores.get(&f).copied().flatten())
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }))
}
