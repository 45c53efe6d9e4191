//! Application configuration: one TOML document covering the day boundary,
//! feature schema, sensors, segmentation rules, similarity, risk factors,
//! the risky template and the HTTP service.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cbr::SimilarityConfig;
use crate::clock::TimeOfDay;
use crate::event::SensorKind;
use crate::profile::{FeatureSchema, ProfileSettings};
use crate::risk::{FactorConfig, RiskFactor, RiskyTemplate};
use crate::segment::{check_rules, SegmentationConfig, SensorGeometry, SensorPlacement};
use crate::sim::Scenario;

const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaySettings {
    pub start: TimeOfDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: String,
    pub kind: SensorKind,
    pub room: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSettings {
    pub listen: String,
    pub cors: bool,
    /// Days averaged for the historical radar overlay.
    pub history_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub day: DaySettings,
    pub profile: ProfileSettings,
    pub schema: FeatureSchema,
    pub sensors: Vec<SensorSpec>,
    pub segmentation: SegmentationConfig,
    pub similarity: SimilarityConfig,
    pub factors: Vec<FactorConfig>,
    pub template: RiskyTemplate,
    pub service: ServiceSettings,
    /// Extra scenarios; a name shadows the built-in of the same name.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<Scenario>,
}

impl Default for AppConfig {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONFIG).expect("default configuration parses")
    }
}

impl AppConfig {
    /// Parses a user document layered over the defaults: each top-level
    /// table present in `text` replaces the default one wholesale.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut base: toml::Table = DEFAULT_CONFIG.parse().expect("default configuration parses");
        let user: toml::Table = text.parse()?;
        for (key, value) in user {
            base.insert(key, value);
        }
        let config: AppConfig = toml::Value::Table(base).try_into()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Loads `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Every problem, each prefixed with the path of the offending entry.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in self.schema.problems().into_iter().chain(self.schema.missing_extractors()) {
            out.push(format!("schema: {p}"));
        }
        for p in self.similarity.problems(&self.schema) {
            out.push(format!("similarity: {p}"));
        }
        for rule in &self.segmentation.rules {
            for p in rule.problems() {
                out.push(format!("segmentation.rules[{}]: {p}", rule.name));
            }
        }
        if let Err(e) = check_rules(&self.segmentation.rules) {
            out.push(format!("segmentation.rules: {e}"));
        }
        let m = &self.segmentation.movement;
        if m.wander_min_transitions == 0 {
            out.push("segmentation.movement: wander_min_transitions must be positive".into());
        }
        if m.transition_timeout.is_zero() {
            out.push("segmentation.movement: transition_timeout must be positive".into());
        }

        let mut seen = BTreeSet::new();
        for s in &self.sensors {
            if !seen.insert(&s.id) {
                out.push(format!("sensors[{}]: duplicate id", s.id));
            }
            if s.kind == SensorKind::Motion && (s.x.is_none() || s.y.is_none()) {
                out.push(format!("sensors[{}]: motion sensors need x and y", s.id));
            }
        }

        let mut configured = BTreeSet::new();
        for f in &self.factors {
            if !configured.insert(f.factor) {
                out.push(format!("factors[{}]: configured twice", f.factor));
            }
            for p in f.problems(&self.schema) {
                out.push(format!("factors[{}]: {p}", f.factor));
            }
        }
        for f in RiskFactor::ALL {
            if !configured.contains(&f) {
                out.push(format!("factors[{f}]: missing"));
            }
        }
        for p in self.template.problems() {
            out.push(format!("template: {p}"));
        }
        if self.template.provenance.trim().is_empty() {
            out.push("template: provenance must not be empty".into());
        }
        if self.service.listen.parse::<std::net::SocketAddr>().is_err() {
            out.push(format!("service: listen address `{}` is not host:port", self.service.listen));
        }
        for s in &self.scenarios {
            for p in s.problems() {
                out.push(format!("scenarios[{}]: {p}", s.name));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn day_start(&self) -> TimeOfDay {
        self.day.start
    }

    /// Placements of the motion sensors.
    pub fn geometry(&self) -> SensorGeometry {
        self.sensors
            .iter()
            .filter(|s| s.kind == SensorKind::Motion)
            .filter_map(|s| {
                Some((
                    s.id.clone(),
                    SensorPlacement {
                        room: s.room.clone(),
                        x: s.x?,
                        y: s.y?,
                    },
                ))
            })
            .collect()
    }

    pub fn installed_kinds(&self) -> BTreeSet<SensorKind> {
        self.sensors.iter().map(|s| s.kind).collect()
    }

    pub fn factor(&self, factor: RiskFactor) -> Option<&FactorConfig> {
        self.factors.iter().find(|f| f.factor == factor)
    }

    /// Hex SHA-256 of the canonical JSON form, truncated to 16 characters.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_value(self).expect("configuration serializes");
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Feature ranges declared in the schema.
    pub fn range_hints(&self) -> BTreeMap<String, [f64; 2]> {
        self.schema
            .features
            .iter()
            .filter_map(|f| Some((f.name.clone(), f.range?)))
            .collect()
    }
}
