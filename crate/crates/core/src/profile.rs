//! Daily behaviour profiles: one mixed-type feature vector per resident-day.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventStream, SensorKind};
use crate::segment::{AdlEpisode, AdlKind, SensorPredicate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid value for `{feature}`: {reason}")]
    InvalidValue { feature: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    Count,
    DurationMinutes,
    Numeric,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Binary => "binary",
            FeatureKind::Count => "count",
            FeatureKind::DurationMinutes => "duration_minutes",
            FeatureKind::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Normalization range hint, `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn range_hint(&self, name: &str) -> Option<Range> {
        self.get(name).and_then(|f| f.range).map(|[a, b]| Range::new(a, b))
    }

    /// Structural problems: duplicate names, bad ranges, features without an extractor.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                out.push(format!("feature `{}` declared twice", f.name));
            }
            if let Some([lo, hi]) = f.range {
                if !(lo < hi) {
                    out.push(format!("feature `{}` range [{lo}, {hi}] needs min < max", f.name));
                }
            }
        }
        out
    }

    /// Features that cannot be computed from episodes.
    pub fn missing_extractors(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| extractor(&f.name).is_none())
            .map(|f| format!("feature `{}` has no registered extractor", f.name))
            .collect()
    }

    /// Checks a value against its feature's type.
    pub fn check_value(&self, name: &str, value: f64) -> Result<(), ProfileError> {
        let spec = self
            .get(name)
            .ok_or_else(|| ProfileError::SchemaMismatch(format!("unknown feature `{name}`")))?;
        let bad = |reason: &str| {
            Err(ProfileError::InvalidValue {
                feature: name.to_string(),
                reason: reason.to_string(),
            })
        };
        if !value.is_finite() {
            return bad("not finite");
        }
        match spec.kind {
            FeatureKind::Binary if value != 0.0 && value != 1.0 => bad("binary feature must be 0 or 1"),
            FeatureKind::Count if value < 0.0 || value.fract() != 0.0 => {
                bad("count must be a non-negative integer")
            }
            FeatureKind::DurationMinutes if value < 0.0 => bad("duration must be non-negative"),
            _ => Ok(()),
        }
    }

    /// Checks that a profile covers exactly this schema with valid values.
    pub fn validate(&self, profile: &DailyProfile) -> Result<(), ProfileError> {
        for f in &self.features {
            if !profile.values.contains_key(&f.name) {
                return Err(ProfileError::SchemaMismatch(format!("missing feature `{}`", f.name)));
            }
        }
        for (name, value) in &profile.values {
            if self.get(name).is_none() {
                return Err(ProfileError::SchemaMismatch(format!("unknown feature `{name}`")));
            }
            if let FeatureValue::Value(v) = value {
                self.check_value(name, *v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    NoSensor,
    NoEpisodes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Value(f64),
    Missing(MissingReason),
}

impl FeatureValue {
    pub fn value(self) -> Option<f64> {
        match self {
            FeatureValue::Value(v) => Some(v),
            FeatureValue::Missing(_) => None,
        }
    }
}

/// Per-resident, per-day feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProfileRecord", from = "ProfileRecord")]
pub struct DailyProfile {
    pub resident_id: String,
    pub date: NaiveDate,
    pub values: BTreeMap<String, FeatureValue>,
    /// Feature name to indices into the day's episode list.
    pub provenance: BTreeMap<String, Vec<usize>>,
}

impl DailyProfile {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.values.get(feature).and_then(|v| v.value())
    }

    pub fn is_null_free(&self) -> bool {
        self.values.values().all(|v| v.value().is_some())
    }
}

/// Flat serialized form of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub resident: String,
    pub date: NaiveDate,
    pub features: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub missing: BTreeMap<String, MissingReason>,
    #[serde(default)]
    pub provenance: BTreeMap<String, Vec<usize>>,
}

impl From<DailyProfile> for ProfileRecord {
    fn from(p: DailyProfile) -> Self {
        let mut features = BTreeMap::new();
        let mut missing = BTreeMap::new();
        for (name, v) in p.values {
            match v {
                FeatureValue::Value(x) => {
                    features.insert(name, Some(x));
                }
                FeatureValue::Missing(r) => {
                    features.insert(name.clone(), None);
                    missing.insert(name, r);
                }
            }
        }
        ProfileRecord {
            resident: p.resident_id,
            date: p.date,
            features,
            missing,
            provenance: p.provenance,
        }
    }
}

impl From<ProfileRecord> for DailyProfile {
    fn from(r: ProfileRecord) -> Self {
        let values = r
            .features
            .into_iter()
            .map(|(name, v)| {
                let value = match v {
                    Some(x) => FeatureValue::Value(x),
                    None => FeatureValue::Missing(
                        r.missing.get(&name).copied().unwrap_or(MissingReason::NoEpisodes),
                    ),
                };
                (name, value)
            })
            .collect();
        DailyProfile {
            resident_id: r.resident,
            date: r.date,
            values,
            provenance: r.provenance,
        }
    }
}

pub fn profile_to_record(profile: &DailyProfile) -> ProfileRecord {
    profile.clone().into()
}

/// Rebuilds a profile and validates it against `schema`.
pub fn record_to_profile(record: ProfileRecord, schema: &FeatureSchema) -> Result<DailyProfile, ProfileError> {
    let profile = DailyProfile::from(record);
    schema.validate(&profile)?;
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSettings {
    /// Bed exits at or above which the night counts as disturbed.
    pub disturbed_threshold: u32,
    /// Which pressure sensors are seats.
    pub chair_sensor: SensorPredicate,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings {
            disturbed_threshold: 2,
            chair_sensor: SensorPredicate::binary(SensorKind::Pressure).sensor_prefix("chair"),
        }
    }
}

struct Inputs<'a> {
    episodes: &'a [AdlEpisode],
    stream: &'a EventStream,
    settings: &'a ProfileSettings,
}

impl Inputs<'_> {
    fn count(&self, kind: AdlKind) -> f64 {
        self.episodes.iter().filter(|e| e.kind == kind).count() as f64
    }

    fn minutes(&self, kind: AdlKind) -> f64 {
        self.episodes
            .iter()
            .filter(|e| e.kind == kind)
            .map(AdlEpisode::minutes)
            .sum()
    }
}

/// How one feature is computed.
#[derive(Clone, Copy)]
pub struct Extractor {
    /// Episode kinds the feature reads (its provenance).
    pub consumes: &'static [AdlKind],
    /// Sensor kind without which the feature is unobservable.
    pub needs: SensorKind,
    compute: fn(&Inputs<'_>) -> Option<f64>,
}

fn active_minutes(inputs: &Inputs<'_>) -> Option<f64> {
    let buckets: BTreeSet<i64> = inputs
        .stream
        .events
        .iter()
        .filter(|e| e.kind == SensorKind::Motion && e.is_activation())
        .map(|e| e.timestamp.timestamp_millis().div_euclid(60_000))
        .collect();
    Some(buckets.len() as f64)
}

fn stand_ups(inputs: &Inputs<'_>) -> Option<f64> {
    let chair = &inputs.settings.chair_sensor;
    Some(
        inputs
            .stream
            .events
            .iter()
            .filter(|e| chair.matches(e) && e.is_deactivation())
            .count() as f64,
    )
}

fn avg_gait_speed(inputs: &Inputs<'_>) -> Option<f64> {
    let speeds: Vec<f64> = inputs
        .episodes
        .iter()
        .filter(|e| e.kind == AdlKind::RoomTransition)
        .filter_map(|e| e.attributes.get("gait_speed").copied())
        .collect();
    if speeds.is_empty() {
        None
    } else {
        Some(speeds.iter().sum::<f64>() / speeds.len() as f64)
    }
}

/// The registered extractor for a feature name.
pub fn extractor(name: &str) -> Option<Extractor> {
    use AdlKind::*;
    let e = |consumes, needs, compute| Some(Extractor { consumes, needs, compute });
    match name {
        "disturbed_sleep" => e(&[BedExit], SensorKind::Pressure, |i| {
            Some(f64::from(i.count(BedExit) >= f64::from(i.settings.disturbed_threshold)))
        }),
        "sleep_duration" => e(&[Sleep], SensorKind::Pressure, |i| Some(i.minutes(Sleep))),
        "sleep_disturbance_count" => e(&[BedExit], SensorKind::Pressure, |i| Some(i.count(BedExit))),
        "room_transition_count" => e(&[RoomTransition], SensorKind::Motion, |i| Some(i.count(RoomTransition))),
        "stand_up_count" => e(&[Sitting], SensorKind::Pressure, stand_ups),
        "time_sitting" => e(&[Sitting], SensorKind::Pressure, |i| Some(i.minutes(Sitting))),
        "avg_gait_speed" => e(&[RoomTransition], SensorKind::Motion, avg_gait_speed),
        "toilet_visit_count" => e(&[Toileting], SensorKind::Float, |i| Some(i.count(Toileting))),
        "wandering_episode_count" => e(&[Wandering], SensorKind::Motion, |i| Some(i.count(Wandering))),
        "active_minutes" => e(&[ActiveMovement], SensorKind::Motion, active_minutes),
        "shower_count" => e(&[Shower], SensorKind::Humidity, |i| Some(i.count(Shower))),
        "cooking_count" => e(&[Cooking], SensorKind::Motion, |i| Some(i.count(Cooking))),
        "eating_drinking_count" => e(&[EatingDrinking], SensorKind::Contact, |i| Some(i.count(EatingDrinking))),
        _ => None,
    }
}

/// Folds one day's episodes and events into a profile.
///
/// `installed` lists the sensor kinds present in the home; features whose
/// sensor kind is absent come out as `no_sensor` nulls. `None` means every
/// kind is installed.
pub fn build_profile(
    episodes: &[AdlEpisode],
    stream: &EventStream,
    schema: &FeatureSchema,
    date: NaiveDate,
    settings: &ProfileSettings,
    installed: Option<&BTreeSet<SensorKind>>,
) -> Result<DailyProfile, ProfileError> {
    let inputs = Inputs {
        episodes,
        stream,
        settings,
    };
    let mut values = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for spec in &schema.features {
        let ex = extractor(&spec.name).ok_or_else(|| {
            ProfileError::SchemaMismatch(format!("no extractor registered for `{}`", spec.name))
        })?;
        let value = if installed.is_some_and(|k| !k.contains(&ex.needs)) {
            FeatureValue::Missing(MissingReason::NoSensor)
        } else {
            match (ex.compute)(&inputs) {
                Some(v) => FeatureValue::Value(v),
                None => FeatureValue::Missing(MissingReason::NoEpisodes),
            }
        };
        if value.value().is_some() {
            let ids: Vec<usize> = episodes
                .iter()
                .enumerate()
                .filter(|(_, e)| ex.consumes.contains(&e.kind))
                .map(|(i, _)| i)
                .collect();
            provenance.insert(spec.name.clone(), ids);
        }
        values.insert(spec.name.clone(), value);
    }
    Ok(DailyProfile {
        resident_id: stream.resident_id.clone(),
        date,
        values,
        provenance,
    })
}
