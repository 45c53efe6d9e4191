//! End-to-end processing of an event stream: per-day segmentation, daily
//! profiles, risk scores, and case bases seeded from simulated residents.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::cbr::{load_casebase, Case, CaseBase, CbrError, Label};
use crate::config::AppConfig;
use crate::event::{covered_dates, load_stream, slice_day, EventStream, LoadError};
use crate::profile::{build_profile, profile_to_record, record_to_profile, DailyProfile, ProfileError, ProfileRecord};
use crate::report::{ReportError, Snapshot};
use crate::risk::{compare_to_template, score_profile, RiskError, RiskProfile};
use crate::segment::{segment_day, AdlEpisode, SegmentError};
use crate::sim::{find_scenario, simulate, SimError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{date}: {source}")]
    Segment { date: NaiveDate, source: SegmentError },
    #[error("{date}: {source}")]
    Profile { date: NaiveDate, source: ProfileError },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cbr(#[from] CbrError),
    #[error("{path}: {source}")]
    Events { path: PathBuf, source: LoadError },
    #[error("{path}: line {line}: {detail}")]
    Profiles { path: PathBuf, line: usize, detail: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Everything derived for one profile day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayResult {
    pub date: NaiveDate,
    pub stream: EventStream,
    pub episodes: Vec<AdlEpisode>,
    pub profile: DailyProfile,
    pub risk: RiskProfile,
}

pub fn segment_one_day(stream: &EventStream, config: &AppConfig) -> Result<Vec<AdlEpisode>, SegmentError> {
    segment_day(stream, &config.segmentation, &config.geometry())
}

/// Segments, profiles and scores every day the stream touches, or only
/// the days in `dates` when given.
pub fn analyse(
    stream: &EventStream,
    config: &AppConfig,
    dates: Option<&[NaiveDate]>,
) -> Result<Vec<DayResult>, PipelineError> {
    let day_start = config.day_start().0;
    let geometry = config.geometry();
    let installed = config.installed_kinds();
    let dates = match dates {
        Some(d) => d.to_vec(),
        None => covered_dates(stream, day_start),
    };
    let mut out = Vec::with_capacity(dates.len());
    for date in dates {
        let day = slice_day(stream, date, day_start);
        let episodes = segment_day(&day, &config.segmentation, &geometry)
            .map_err(|source| PipelineError::Segment { date, source })?;
        let profile = build_profile(&episodes, &day, &config.schema, date, &config.profile, Some(&installed))
            .map_err(|source| PipelineError::Profile { date, source })?;
        let risk = compare_to_template(&score_profile(&profile, &config.factors)?, &config.template);
        out.push(DayResult {
            date,
            stream: day,
            episodes,
            profile,
            risk,
        });
    }
    Ok(out)
}

/// Scenarios simulated into the seed case base, with their labels.
pub const SEED_SCENARIOS: [(&str, Label); 3] = [
    ("steady_healthy", Label::NotRisky),
    ("poor_sleep_frequent_toilet", Label::Risky),
    ("gradual_decline", Label::Unlabelled),
];

/// Profiles of one simulated scenario.
pub fn simulate_profiles(name: &str, config: &AppConfig) -> Result<Vec<DailyProfile>, PipelineError> {
    let scenario = find_scenario(name, &config.scenarios)?;
    let sim = simulate(&scenario)?;
    Ok(analyse(&sim.stream, config, None)?
        .into_iter()
        .map(|d| d.profile)
        .collect())
}

/// A case base of every simulated day of the seed scenarios.
pub fn seed_casebase(config: &AppConfig) -> Result<CaseBase, PipelineError> {
    let mut simulated = Vec::new();
    for (name, _) in SEED_SCENARIOS {
        simulated.push(simulate_profiles(name, config)?);
    }
    casebase_from_seed(config, &simulated)
}

fn casebase_from_seed(config: &AppConfig, simulated: &[Vec<DailyProfile>]) -> Result<CaseBase, PipelineError> {
    let mut base = CaseBase::new(config.schema.clone());
    for ((name, label), profiles) in SEED_SCENARIOS.iter().zip(simulated) {
        for profile in profiles {
            base.insert(Case {
                case_id: format!("{name}:{}", profile.date),
                profile: profile.clone(),
                context: BTreeMap::from([("source".to_string(), "simulation".to_string())]),
                label: *label,
                label_source: format!("simulated:{name}"),
            })?;
        }
    }
    Ok(base)
}

/// Adds each profile as an unlabelled case of its resident.
pub fn casebase_from_profiles(config: &AppConfig, profiles: &[DailyProfile]) -> Result<CaseBase, CbrError> {
    let mut base = CaseBase::new(config.schema.clone());
    for p in profiles {
        base.insert(Case {
            case_id: format!("{}:{}", p.resident_id, p.date),
            profile: p.clone(),
            context: BTreeMap::new(),
            label: Label::Unlabelled,
            label_source: String::new(),
        })?;
    }
    Ok(base)
}

pub fn profiles_to_jsonl(profiles: &[DailyProfile]) -> String {
    let mut out = String::new();
    for p in profiles {
        out.push_str(&serde_json::to_string(&profile_to_record(p)).expect("profile serializes"));
        out.push('\n');
    }
    out
}

/// Parses profile records, one per line, checking each against `schema`.
pub fn parse_profiles(text: &str, config: &AppConfig) -> Result<Vec<DailyProfile>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ProfileRecord = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        out.push(record_to_profile(record, &config.schema).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_profiles(path: &Path, config: &AppConfig) -> Result<Vec<DailyProfile>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_profiles(&text, config).map_err(|(line, detail)| PipelineError::Profiles {
        path: path.to_path_buf(),
        line,
        detail,
    })
}

/// An event file and the resident it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSource {
    pub resident: String,
    pub path: PathBuf,
}

impl std::str::FromStr for EventSource {
    type Err = String;

    /// `RESIDENT=PATH`, or a bare path whose file stem names the resident.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (resident, path) = match s.split_once('=') {
            Some((r, p)) if !r.is_empty() && !r.contains(['/', '\\']) => (r.to_string(), PathBuf::from(p)),
            _ => {
                let path = PathBuf::from(s);
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| format!("cannot derive a resident id from `{s}`"))?
                    .to_string();
                (stem, path)
            }
        };
        Ok(EventSource { resident, path })
    }
}

pub fn load_events(source: &EventSource) -> Result<EventStream, PipelineError> {
    load_stream(&source.path, source.resident.clone()).map_err(|e| PipelineError::Events {
        path: source.path.clone(),
        source: e,
    })
}

/// Where a snapshot's data comes from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotInputs {
    pub events: Vec<EventSource>,
    pub profiles: Vec<PathBuf>,
    /// Seeds the case base from simulated residents when absent.
    pub casebase: Option<PathBuf>,
    /// Adds the built-in simulated residents as residents.
    pub demo: bool,
}

/// Loads and processes every input into one snapshot.
pub fn build_snapshot(config: &AppConfig, inputs: &SnapshotInputs) -> Result<Snapshot, PipelineError> {
    let mut profiles = Vec::new();
    for source in &inputs.events {
        let stream = load_events(source)?;
        profiles.extend(analyse(&stream, config, None)?.into_iter().map(|d| d.profile));
    }
    for path in &inputs.profiles {
        profiles.extend(load_profiles(path, config)?);
    }
    let simulated = if inputs.demo || inputs.casebase.is_none() {
        let mut out = Vec::new();
        for (name, _) in SEED_SCENARIOS {
            out.push(simulate_profiles(name, config)?);
        }
        out
    } else {
        Vec::new()
    };
    if inputs.demo {
        profiles.extend(simulated.iter().flatten().cloned());
    }
    let casebase = match &inputs.casebase {
        Some(path) => load_casebase(path)?,
        None => casebase_from_seed(config, &simulated)?,
    };
    if casebase.schema != config.schema {
        return Err(CbrError::SchemaMismatch("case base schema differs from the configured schema".into()).into());
    }
    Ok(Snapshot::build(config.clone(), profiles, casebase)?)
}
