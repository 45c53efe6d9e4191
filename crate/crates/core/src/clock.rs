//! Time-of-day values and ranges used by rules, windows and scenarios.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::event::Timestamp;

/// A wall-clock time written as `HH:MM` (or `HH:MM:SS`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(pub NaiveTime);

impl TimeOfDay {
    pub fn hm(hour: u32, minute: u32) -> Self {
        TimeOfDay(NaiveTime::from_hms_opt(hour, minute, 0).expect("valid time of day"))
    }

    /// Milliseconds since midnight.
    pub fn millis(self) -> i64 {
        i64::from(self.0.num_seconds_from_midnight()) * 1000
            + i64::from(self.0.nanosecond() / 1_000_000)
    }

    pub fn of(ts: Timestamp) -> Self {
        TimeOfDay(ts.time())
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.second() == 0 {
            write!(f, "{}", self.0.format("%H:%M"))
        } else {
            write!(f, "{}", self.0.format("%H:%M:%S"))
        }
    }
}

impl FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveTime::parse_from_str(s, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
            .map(TimeOfDay)
            .map_err(|_| format!("invalid time of day `{s}` (expected HH:MM)"))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const DAY_MS: i64 = 86_400_000;

/// A daily time range `[start, end)` that may wrap past midnight,
/// written as a two-element array: `["22:00", "06:00"]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange(pub TimeOfDay, pub TimeOfDay);

impl TimeRange {
    pub fn start(&self) -> TimeOfDay {
        self.0
    }

    pub fn end(&self) -> TimeOfDay {
        self.1
    }

    /// Length of the range in milliseconds; equal endpoints mean the whole day.
    pub fn span_ms(&self) -> i64 {
        let d = (self.1.millis() - self.0.millis()).rem_euclid(DAY_MS);
        if d == 0 {
            DAY_MS
        } else {
            d
        }
    }

    pub fn contains(&self, t: TimeOfDay) -> bool {
        (t.millis() - self.0.millis()).rem_euclid(DAY_MS) < self.span_ms()
    }

    /// Whether `[start, end]` lies inside one occurrence of the range.
    pub fn covers(&self, start: Timestamp, end: Timestamp) -> bool {
        let offset = (TimeOfDay::of(start).millis() - self.0.millis()).rem_euclid(DAY_MS);
        offset < self.span_ms() && offset + (end - start).num_milliseconds() <= self.span_ms()
    }
}

/// Converts a config duration to a signed chrono duration.
pub fn chrono_duration(d: std::time::Duration) -> Duration {
    Duration::milliseconds(i64::try_from(d.as_millis()).unwrap_or(i64::MAX))
}

/// Serde helper writing timestamps as RFC 3339 with milliseconds.
pub mod ts_format {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::event::{format_timestamp, parse_timestamp, Timestamp};

    pub fn serialize<S: Serializer>(ts: &Timestamp, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_timestamp(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}
