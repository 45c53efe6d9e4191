//! Case base and similarity retrieval over daily profiles.
//!
//! Local similarity is range-normalized linear difference for counts,
//! durations and numerics, and equality for binary features. Global
//! similarity is the weight-normalized sum of local similarities, taken in
//! schema order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{DailyProfile, FeatureKind, FeatureSchema, ProfileError, Range};

#[derive(Debug, Error)]
pub enum CbrError {
    #[error("degenerate range for `{0}` (min equals max)")]
    DegenerateRange(String),
    #[error("case id `{0}` already in the case base")]
    DuplicateCaseId(String),
    #[error("case `{0}`: label_source is required for labelled cases")]
    MissingLabelSource(String),
    #[error("case `{case}`: {source}")]
    Profile {
        case: String,
        #[source]
        source: ProfileError,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("case base file is not valid JSON: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Risky,
    NotRisky,
    Unlabelled,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Risky => "risky",
            Label::NotRisky => "not_risky",
            Label::Unlabelled => "unlabelled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub profile: DailyProfile,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    pub label: Label,
    #[serde(default)]
    pub label_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    /// Feature weights; features not listed weigh 1.0.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    pub null_similarity: f64,
    pub k: usize,
    pub trend_window: usize,
    pub trend_threshold: f64,
}

impl SimilarityConfig {
    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(1.0)
    }

    pub fn problems(&self, schema: &FeatureSchema) -> Vec<String> {
        let mut out = Vec::new();
        for (name, w) in &self.weights {
            if schema.get(name).is_none() {
                out.push(format!("weight for unknown feature `{name}`"));
            }
            if !(w.is_finite() && *w >= 0.0) {
                out.push(format!("weight for `{name}` must be non-negative, got {w}"));
            }
        }
        let total: f64 = schema.names().map(|n| self.weight(n)).sum();
        if !(total > 0.0) {
            out.push("weights must sum to a positive value".to_string());
        }
        if !(0.0..=1.0).contains(&self.null_similarity) {
            out.push(format!("null_similarity {} outside [0, 1]", self.null_similarity));
        }
        if self.k == 0 {
            out.push("k must be at least 1".to_string());
        }
        if self.trend_window == 0 {
            out.push("trend_window must be at least 1".to_string());
        }
        out
    }
}

pub type Ranges = BTreeMap<String, Range>;

pub fn local_similarity(
    kind: FeatureKind,
    a: Option<f64>,
    b: Option<f64>,
    range: Range,
    null_similarity: f64,
) -> Result<f64, CbrError> {
    if kind != FeatureKind::Binary && !(range.min < range.max) {
        return Err(CbrError::DegenerateRange(String::new()));
    }
    let (Some(a), Some(b)) = (a, b) else {
        return Ok(null_similarity);
    };
    Ok(match kind {
        FeatureKind::Binary => f64::from(a == b),
        _ => (1.0 - (a - b).abs() / range.width()).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub score: f64,
    pub per_feature: BTreeMap<String, f64>,
}

pub fn global_similarity(
    p: &DailyProfile,
    q: &DailyProfile,
    schema: &FeatureSchema,
    config: &SimilarityConfig,
    ranges: &Ranges,
) -> Result<Similarity, CbrError> {
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut per_feature = BTreeMap::new();
    for spec in &schema.features {
        let range = ranges
            .get(&spec.name)
            .copied()
            .unwrap_or(Range::new(0.0, 1.0));
        let local = local_similarity(
            spec.kind,
            p.get(&spec.name),
            q.get(&spec.name),
            range,
            config.null_similarity,
        )
        .map_err(|_| CbrError::DegenerateRange(spec.name.clone()))?;
        let w = config.weight(&spec.name);
        weighted += w * local;
        total += w;
        per_feature.insert(spec.name.clone(), local);
    }
    Ok(Similarity {
        score: weighted / total,
        per_feature,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Intervene,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    pub case_id: String,
    pub similarity: f64,
    pub per_feature: BTreeMap<String, f64>,
    pub label: Label,
    pub label_source: String,
    pub resident: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub neighbours: Vec<Neighbour>,
    pub recommendation: Recommendation,
    pub vote_score: f64,
}

/// A labelled set of daily profiles, immutable once built; `add_case`
/// returns a new snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBase {
    pub schema: FeatureSchema,
    pub ranges: Ranges,
    pub cases: Vec<Case>,
}

impl CaseBase {
    pub fn new(schema: FeatureSchema) -> Self {
        CaseBase {
            schema,
            ranges: Ranges::new(),
            cases: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    fn check_case(&self, case: &Case) -> Result<(), CbrError> {
        if case.label != Label::Unlabelled && case.label_source.trim().is_empty() {
            return Err(CbrError::MissingLabelSource(case.case_id.clone()));
        }
        self.schema.validate(&case.profile).map_err(|source| CbrError::Profile {
            case: case.case_id.clone(),
            source,
        })
    }

    pub fn add_case(&self, case: Case) -> Result<CaseBase, CbrError> {
        let mut next = self.clone();
        next.insert(case)?;
        Ok(next)
    }

    /// In-place variant of [`CaseBase::add_case`] for bulk building.
    pub fn insert(&mut self, case: Case) -> Result<(), CbrError> {
        if self.cases.iter().any(|c| c.case_id == case.case_id) {
            return Err(CbrError::DuplicateCaseId(case.case_id));
        }
        self.check_case(&case)?;
        for (name, v) in &case.profile.values {
            if let Some(x) = v.value() {
                self.ranges
                    .entry(name.clone())
                    .and_modify(|r| r.include(x))
                    .or_insert(Range::new(x, x));
            }
        }
        self.cases.push(case);
        Ok(())
    }

    /// Normalization ranges: schema hints where declared, otherwise the
    /// observed range. An observed range with zero width is widened to
    /// `[min, min + 1]`; a feature never observed uses `[0, 1]`.
    pub fn similarity_ranges(&self) -> Ranges {
        self.schema
            .features
            .iter()
            .map(|f| {
                let range = self.schema.range_hint(&f.name).unwrap_or_else(|| {
                    match self.ranges.get(&f.name) {
                        Some(r) if r.min < r.max => *r,
                        Some(r) => Range::new(r.min, r.min + 1.0),
                        None => Range::new(0.0, 1.0),
                    }
                });
                (f.name.clone(), range)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case base serializes")
    }

    pub fn from_json(text: &str) -> Result<CaseBase, CbrError> {
        let raw: CaseBase = serde_json::from_str(text)?;
        let problems = raw.schema.problems();
        if !problems.is_empty() {
            return Err(CbrError::SchemaMismatch(problems.join("; ")));
        }
        let mut ids = BTreeSet::new();
        for case in &raw.cases {
            if !ids.insert(case.case_id.as_str()) {
                return Err(CbrError::DuplicateCaseId(case.case_id.clone()));
            }
            raw.check_case(case)?;
            for (name, v) in &case.profile.values {
                let covered = match (v.value(), raw.ranges.get(name)) {
                    (None, _) => true,
                    (Some(x), Some(r)) => r.min <= x && x <= r.max,
                    (Some(_), None) => false,
                };
                if !covered {
                    return Err(CbrError::SchemaMismatch(format!(
                        "stored ranges do not cover `{name}` of case `{}`",
                        case.case_id
                    )));
                }
            }
        }
        Ok(raw)
    }
}

pub fn save_casebase(base: &CaseBase, path: impl AsRef<Path>) -> Result<(), CbrError> {
    let path = path.as_ref();
    fs::write(path, base.to_json()).map_err(|source| CbrError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_casebase(path: impl AsRef<Path>) -> Result<CaseBase, CbrError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CbrError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CaseBase::from_json(&text)
}

/// Top-k neighbours by global similarity, ties broken by case id.
pub fn retrieve(
    query: &DailyProfile,
    base: &CaseBase,
    config: &SimilarityConfig,
    k: usize,
    exclude_resident: Option<&str>,
) -> Result<RetrievalResult, CbrError> {
    let ranges = base.similarity_ranges();
    let mut scored = Vec::new();
    for case in &base.cases {
        if exclude_resident.is_some_and(|r| r == case.profile.resident_id) {
            continue;
        }
        let sim = global_similarity(query, &case.profile, &base.schema, config, &ranges)?;
        scored.push((case, sim));
    }
    scored.sort_by(|(ca, a), (cb, b)| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| ca.case_id.cmp(&cb.case_id))
    });
    scored.truncate(k);

    let mut risky = 0.0;
    let mut labelled = 0.0;
    let mut any_labelled = false;
    for (case, sim) in &scored {
        match case.label {
            Label::Risky => {
                risky += sim.score;
                labelled += sim.score;
                any_labelled = true;
            }
            Label::NotRisky => {
                labelled += sim.score;
                any_labelled = true;
            }
            Label::Unlabelled => {}
        }
    }
    let vote_score = if labelled > 0.0 { risky / labelled } else { 0.0 };
    let recommendation = if any_labelled && vote_score >= 0.5 {
        Recommendation::Intervene
    } else {
        Recommendation::None
    };

    Ok(RetrievalResult {
        neighbours: scored
            .into_iter()
            .map(|(case, sim)| Neighbour {
                case_id: case.case_id.clone(),
                similarity: sim.score,
                per_feature: sim.per_feature,
                label: case.label,
                label_source: case.label_source.clone(),
                resident: case.profile.resident_id.clone(),
                date: case.profile.date,
            })
            .collect(),
        recommendation,
        vote_score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub date: NaiveDate,
    pub self_similarity: f64,
    pub flag: bool,
}

/// Mean similarity of each day to its `window` predecessors; days with
/// shorter history are omitted.
pub fn self_trend(
    history: &[DailyProfile],
    window: usize,
    schema: &FeatureSchema,
    config: &SimilarityConfig,
    ranges: &Ranges,
) -> Result<Vec<TrendPoint>, CbrError> {
    let mut out = Vec::new();
    for d in window..history.len() {
        let mut sum = 0.0;
        for prev in &history[d - window..d] {
            sum += global_similarity(&history[d], prev, schema, config, ranges)?.score;
        }
        let self_similarity = sum / window as f64;
        out.push(TrendPoint {
            date: history[d].date,
            self_similarity,
            flag: self_similarity < config.trend_threshold,
        });
    }
    Ok(out)
}
