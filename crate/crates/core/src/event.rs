//! Sensor events and event streams.
//!
//! Events arrive as JSON lines with exactly five fields:
//!
//! ```text
//! {"sensor":"bed.pressure","kind":"pressure","ts":"2023-01-01T23:00:00Z","value":1,"location":"bedroom"}
//! ```
//!
//! Binary kinds (`motion`, `contact`, `pressure`, `float`) carry 0 or 1;
//! continuous kinds (`power` in watts, `humidity` in %RH) carry a
//! non-negative reading.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("malformed event line: {0}")]
    MalformedLine(String),
    #[error("unknown sensor kind `{0}`")]
    UnknownKind(String),
    #[error("bad value {value} for {kind} sensor `{sensor}`")]
    BadValue {
        sensor: String,
        kind: SensorKind,
        value: f64,
    },
    #[error("bad timestamp `{0}`")]
    BadTimestamp(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: EventError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Motion,
    Contact,
    Pressure,
    Power,
    Float,
    Humidity,
}

impl SensorKind {
    pub const ALL: [SensorKind; 6] = [
        SensorKind::Motion,
        SensorKind::Contact,
        SensorKind::Pressure,
        SensorKind::Power,
        SensorKind::Float,
        SensorKind::Humidity,
    ];

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            SensorKind::Motion | SensorKind::Contact | SensorKind::Pressure | SensorKind::Float
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Motion => "motion",
            SensorKind::Contact => "contact",
            SensorKind::Pressure => "pressure",
            SensorKind::Power => "power",
            SensorKind::Float => "float",
            SensorKind::Humidity => "humidity",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EventError::UnknownKind(s.to_string()))
    }
}

/// One validated reading from one named sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub timestamp: Timestamp,
    pub value: f64,
    pub location: String,
}

/// Wire layout of one JSONL record.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    sensor: String,
    kind: String,
    ts: String,
    value: f64,
    location: String,
}

impl SensorEvent {
    pub fn new(
        sensor_id: impl Into<String>,
        kind: SensorKind,
        timestamp: Timestamp,
        value: f64,
        location: impl Into<String>,
    ) -> Result<Self, EventError> {
        let sensor_id = sensor_id.into();
        let valid = if kind.is_binary() {
            value == 0.0 || value == 1.0
        } else {
            value.is_finite() && value >= 0.0
        };
        if !valid {
            return Err(EventError::BadValue {
                sensor: sensor_id,
                kind,
                value,
            });
        }
        Ok(SensorEvent {
            sensor_id,
            kind,
            timestamp: truncate_millis(timestamp),
            value,
            location: location.into(),
        })
    }

    /// Binary activation edge (value 1).
    pub fn is_activation(&self) -> bool {
        self.kind.is_binary() && self.value == 1.0
    }

    pub fn is_deactivation(&self) -> bool {
        self.kind.is_binary() && self.value == 0.0
    }

    /// Serialize as one JSONL record (no trailing newline).
    pub fn to_json_line(&self) -> String {
        let record = EventRecord {
            sensor: self.sensor_id.clone(),
            kind: self.kind.as_str().to_string(),
            ts: format_timestamp(self.timestamp),
            value: self.value,
            location: self.location.clone(),
        };
        serde_json::to_string(&record).expect("event record serializes")
    }
}

pub fn format_timestamp(ts: Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_timestamp(s: &str) -> Result<Timestamp, EventError> {
    DateTime::parse_from_rfc3339(s)
        .map(|dt| truncate_millis(dt.with_timezone(&Utc)))
        .map_err(|_| EventError::BadTimestamp(s.to_string()))
}

fn truncate_millis(ts: Timestamp) -> Timestamp {
    DateTime::from_timestamp_millis(ts.timestamp_millis()).expect("millisecond timestamp in range")
}

/// Parse one JSONL record into a validated event.
pub fn parse_event_line(line: &str) -> Result<SensorEvent, EventError> {
    let record: EventRecord =
        serde_json::from_str(line).map_err(|e| EventError::MalformedLine(e.to_string()))?;
    let kind: SensorKind = record.kind.parse()?;
    let timestamp = parse_timestamp(&record.ts)?;
    SensorEvent::new(record.sensor, kind, timestamp, record.value, record.location)
}

/// Time-ordered events of one resident.
///
/// `window` is the half-open interval the stream was cut to, when it came
/// from [`slice_day`]; segmentation closes dangling activations at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub resident_id: String,
    pub events: Vec<SensorEvent>,
    pub window: Option<(Timestamp, Timestamp)>,
}

impl EventStream {
    /// Builds a stream, sorting stably by `(timestamp, sensor_id)`.
    pub fn new(resident_id: impl Into<String>, mut events: Vec<SensorEvent>) -> Self {
        events.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.sensor_id.cmp(&b.sensor_id))
        });
        EventStream {
            resident_id: resident_id.into(),
            events,
            window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// End of the covered interval: the slice window end, or the last event.
    pub fn horizon(&self) -> Option<Timestamp> {
        self.window
            .map(|(_, end)| end)
            .or_else(|| self.events.last().map(|e| e.timestamp))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.to_json_line());
            out.push('\n');
        }
        out
    }
}

pub fn parse_stream(
    text: &str,
    resident_id: impl Into<String>,
) -> Result<EventStream, LoadError> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_event_line(line).map_err(|source| LoadError::Line {
            line: idx + 1,
            source,
        })?;
        events.push(event);
    }
    Ok(EventStream::new(resident_id, events))
}

pub fn load_stream(
    path: impl AsRef<Path>,
    resident_id: impl Into<String>,
) -> Result<EventStream, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_stream(&text, resident_id)
}

/// `[day_start(date), day_start(date) + 24h)`.
pub fn day_window(date: NaiveDate, day_start: NaiveTime) -> (Timestamp, Timestamp) {
    let start = date.and_time(day_start).and_utc();
    (start, start + Duration::days(1))
}

/// The profile date whose window contains `ts`.
pub fn profile_date(ts: Timestamp, day_start: NaiveTime) -> NaiveDate {
    let offset = day_start.signed_duration_since(NaiveTime::MIN);
    (ts - offset).date_naive()
}

pub fn slice_day(stream: &EventStream, date: NaiveDate, day_start: NaiveTime) -> EventStream {
    let (start, end) = day_window(date, day_start);
    let lo = stream.events.partition_point(|e| e.timestamp < start);
    let hi = stream.events.partition_point(|e| e.timestamp < end);
    EventStream {
        resident_id: stream.resident_id.clone(),
        events: stream.events[lo..hi].to_vec(),
        window: Some((start, end)),
    }
}

/// Every profile date from the first event's to the last event's, inclusive.
pub fn covered_dates(stream: &EventStream, day_start: NaiveTime) -> Vec<NaiveDate> {
    let (Some(first), Some(last)) = (stream.events.first(), stream.events.last()) else {
        return Vec::new();
    };
    let first = profile_date(first.timestamp, day_start);
    let last = profile_date(last.timestamp, day_start);
    first.iter_days().take_while(|d| *d <= last).collect()
}
