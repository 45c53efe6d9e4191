//! ADL segmentation: declarative rules that turn a day's sensor events into
//! activity episodes, plus the movement detectors (room transitions with
//! gait speed, night-time wandering).
//!
//! A rule names a trigger predicate and one of four matching modes:
//!
//! * `interval` – spans where the trigger is active (binary activate to
//!   deactivate, or a continuous threshold crossing to its hysteresis fall),
//!   joined when separated by at most `max_gap`;
//! * `gap` – spans where a binary trigger is inactive between a deactivation
//!   and the next activation of the same sensor;
//! * `cluster` – a trigger firing followed by trigger/supporting firings each
//!   within `max_gap` of the previous one;
//! * `instant` – a single trigger firing widened to the supporting firings
//!   within `max_gap` on either side.
//!
//! Every candidate must then satisfy the duration bounds, the optional
//! time-of-day window, `min_support` and the absence predicates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::time::Duration as StdDuration;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{chrono_duration, ts_format, TimeOfDay, TimeRange};
use crate::event::{EventStream, SensorEvent, SensorKind, Timestamp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("rules `{first}` and `{second}` both produce {kind} from the same trigger")]
    RuleConflict {
        first: String,
        second: String,
        kind: AdlKind,
    },
    #[error("motion sensor `{0}` has no geometry entry")]
    UnknownSensor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdlKind {
    Sleep,
    BedExit,
    Shower,
    Cooking,
    EatingDrinking,
    Toileting,
    Grooming,
    Sitting,
    RoomTransition,
    Wandering,
    ActiveMovement,
}

impl AdlKind {
    pub const ALL: [AdlKind; 11] = [
        AdlKind::Sleep,
        AdlKind::BedExit,
        AdlKind::Shower,
        AdlKind::Cooking,
        AdlKind::EatingDrinking,
        AdlKind::Toileting,
        AdlKind::Grooming,
        AdlKind::Sitting,
        AdlKind::RoomTransition,
        AdlKind::Wandering,
        AdlKind::ActiveMovement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdlKind::Sleep => "sleep",
            AdlKind::BedExit => "bed_exit",
            AdlKind::Shower => "shower",
            AdlKind::Cooking => "cooking",
            AdlKind::EatingDrinking => "eating_drinking",
            AdlKind::Toileting => "toileting",
            AdlKind::Grooming => "grooming",
            AdlKind::Sitting => "sitting",
            AdlKind::RoomTransition => "room_transition",
            AdlKind::Wandering => "wandering",
            AdlKind::ActiveMovement => "active_movement",
        }
    }
}

impl fmt::Display for AdlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Matches events by kind, optional location and optional sensor-id prefix.
///
/// For continuous kinds `rise` sets the firing threshold. With `baseline`
/// the threshold is relative to the minimum reading over that trailing
/// window; the predicate falls back below 80 % of `rise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorPredicate {
    pub kind: SensorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rise: Option<f64>,
    #[serde(
        default,
        with = "humantime_serde",
        skip_serializing_if = "Option::is_none"
    )]
    pub baseline: Option<StdDuration>,
}

/// Fraction of `rise` below which a continuous predicate deactivates.
pub const HYSTERESIS_FALL: f64 = 0.8;

impl SensorPredicate {
    pub fn binary(kind: SensorKind) -> Self {
        SensorPredicate {
            kind,
            location: None,
            sensor: None,
            rise: None,
            baseline: None,
        }
    }

    pub fn at(mut self, location: &str) -> Self {
        self.location = Some(location.to_string());
        self
    }

    pub fn sensor_prefix(mut self, prefix: &str) -> Self {
        self.sensor = Some(prefix.to_string());
        self
    }

    pub fn rising(mut self, rise: f64, baseline: Option<StdDuration>) -> Self {
        self.rise = Some(rise);
        self.baseline = baseline;
        self
    }

    /// Whether the event comes from a sensor this predicate watches.
    pub fn matches(&self, event: &SensorEvent) -> bool {
        event.kind == self.kind
            && self.location.as_deref().is_none_or(|l| l == event.location)
            && self
                .sensor
                .as_deref()
                .is_none_or(|p| event.sensor_id.starts_with(p))
    }

    fn rise_threshold(&self) -> f64 {
        self.rise.unwrap_or(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    Interval,
    Gap,
    Cluster,
    Instant,
}

fn default_max_duration() -> StdDuration {
    StdDuration::from_secs(24 * 3600)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdlRule {
    pub name: String,
    pub produces: AdlKind,
    pub mode: RuleMode,
    pub trigger: SensorPredicate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supporting: Vec<SensorPredicate>,
    #[serde(default)]
    pub min_support: usize,
    #[serde(with = "humantime_serde")]
    pub max_gap: StdDuration,
    #[serde(default, with = "humantime_serde")]
    pub min_duration: StdDuration,
    #[serde(default = "default_max_duration", with = "humantime_serde")]
    pub max_duration: StdDuration,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absence: Vec<SensorPredicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<TimeRange>,
}

impl AdlRule {
    /// Configuration problems with this rule, as human-readable messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_duration > self.max_duration {
            out.push(format!(
                "min_duration ({:?}) exceeds max_duration ({:?})",
                self.min_duration, self.max_duration
            ));
        }
        if self.max_gap.is_zero() {
            out.push("max_gap must be positive".to_string());
        }
        if matches!(self.mode, RuleMode::Gap) && !self.trigger.kind.is_binary() {
            out.push("gap rules need a binary trigger".to_string());
        }
        for p in std::iter::once(&self.trigger)
            .chain(&self.supporting)
            .chain(&self.absence)
        {
            if let Some(rise) = p.rise {
                if !(rise.is_finite() && rise > 0.0) {
                    out.push(format!("rise threshold {rise} must be positive"));
                }
            }
        }
        out
    }

    /// Whether `event` satisfies the trigger or a supporting predicate.
    pub fn accepts(&self, event: &SensorEvent) -> bool {
        self.trigger.matches(event) || self.supporting.iter().any(|p| p.matches(event))
    }
}

/// One recognised activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdlEpisode {
    pub kind: AdlKind,
    #[serde(with = "ts_format")]
    pub start: Timestamp,
    #[serde(with = "ts_format")]
    pub end: Timestamp,
    /// Indices into the day's event stream.
    pub sources: Vec<usize>,
    #[serde(default)]
    pub attributes: BTreeMap<String, f64>,
    /// Rooms visited, for movement episodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub route: Vec<String>,
}

impl AdlEpisode {
    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    pub fn minutes(&self) -> f64 {
        self.duration().num_milliseconds() as f64 / 60_000.0
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("episode serializes")
    }
}

pub fn episodes_to_jsonl(episodes: &[AdlEpisode]) -> String {
    let mut out = String::new();
    for e in episodes {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

/// Where a motion sensor sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    pub room: String,
    pub x: f64,
    pub y: f64,
}

pub type SensorGeometry = BTreeMap<String, SensorPlacement>;

/// Movement-detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementSettings {
    #[serde(with = "humantime_serde")]
    pub transition_timeout: StdDuration,
    #[serde(with = "humantime_serde")]
    pub gait_min_gap: StdDuration,
    pub wander_min_transitions: usize,
    #[serde(with = "humantime_serde")]
    pub wander_max_gap: StdDuration,
    pub night_window: TimeRange,
}

impl Default for MovementSettings {
    fn default() -> Self {
        MovementSettings {
            transition_timeout: StdDuration::from_secs(60),
            gait_min_gap: StdDuration::from_millis(500),
            wander_min_transitions: 4,
            wander_max_gap: StdDuration::from_secs(600),
            night_window: TimeRange(TimeOfDay::hm(22, 0), TimeOfDay::hm(6, 0)),
        }
    }
}

/// A span plus the events that bound or support it.
#[derive(Debug, Clone)]
struct Span {
    start: Timestamp,
    end: Timestamp,
    sources: Vec<usize>,
}

const MIN_EPISODE: i64 = 1000;

fn ensure_positive(start: Timestamp, end: Timestamp) -> Timestamp {
    if end > start {
        end
    } else {
        start + Duration::milliseconds(MIN_EPISODE)
    }
}

/// Indices of events at which `pred` fires: binary activations, or
/// continuous rise edges.
fn firings(events: &[SensorEvent], pred: &SensorPredicate) -> Vec<usize> {
    if pred.kind.is_binary() {
        events
            .iter()
            .enumerate()
            .filter(|(_, e)| pred.matches(e) && e.is_activation())
            .map(|(i, _)| i)
            .collect()
    } else {
        let mut out: Vec<usize> = continuous_spans(events, pred, None)
            .into_iter()
            .map(|s| s.sources[0])
            .collect();
        out.sort_unstable();
        out
    }
}

/// Groups matching event indices per sensor, preserving time order.
fn per_sensor(events: &[SensorEvent], pred: &SensorPredicate) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        if pred.matches(e) {
            out.entry(e.sensor_id.clone()).or_default().push(i);
        }
    }
    out
}

/// Threshold crossings of a continuous predicate with hysteresis. A span
/// still open at the end of the data is closed at `horizon` when given.
fn continuous_spans(
    events: &[SensorEvent],
    pred: &SensorPredicate,
    horizon: Option<Timestamp>,
) -> Vec<Span> {
    let rise = pred.rise_threshold();
    let window = pred.baseline.map(chrono_duration);
    let mut spans = Vec::new();
    for indices in per_sensor(events, pred).values() {
        let mut history: VecDeque<(Timestamp, f64)> = VecDeque::new();
        let mut active: Option<(usize, f64)> = None;
        for &i in indices {
            let e = &events[i];
            let baseline = match window {
                Some(w) => {
                    while history.front().is_some_and(|(t, _)| *t < e.timestamp - w) {
                        history.pop_front();
                    }
                    history
                        .iter()
                        .map(|(_, v)| *v)
                        .fold(e.value, f64::min)
                }
                None => 0.0,
            };
            match active {
                None if e.value - baseline >= rise => active = Some((i, baseline)),
                Some((start, base0)) if e.value - base0 < HYSTERESIS_FALL * rise => {
                    spans.push(Span {
                        start: events[start].timestamp,
                        end: ensure_positive(events[start].timestamp, e.timestamp),
                        sources: vec![start, i],
                    });
                    active = None;
                }
                _ => {}
            }
            if window.is_some() {
                history.push_back((e.timestamp, e.value));
            }
        }
        if let (Some((start, _)), Some(h)) = (active, horizon) {
            let t = events[start].timestamp;
            spans.push(Span {
                start: t,
                end: ensure_positive(t, h.max(t)),
                sources: vec![start],
            });
        }
    }
    spans
}

/// Activate-to-deactivate spans of a binary predicate, per sensor.
fn binary_spans(
    events: &[SensorEvent],
    pred: &SensorPredicate,
    horizon: Option<Timestamp>,
) -> Vec<Span> {
    let mut spans = Vec::new();
    for indices in per_sensor(events, pred).values() {
        let mut active: Option<usize> = None;
        for &i in indices {
            let e = &events[i];
            match active {
                None if e.is_activation() => active = Some(i),
                Some(start) if e.is_deactivation() => {
                    let t = events[start].timestamp;
                    spans.push(Span {
                        start: t,
                        end: ensure_positive(t, e.timestamp),
                        sources: vec![start, i],
                    });
                    active = None;
                }
                _ => {}
            }
        }
        if let (Some(start), Some(h)) = (active, horizon) {
            let t = events[start].timestamp;
            spans.push(Span {
                start: t,
                end: ensure_positive(t, h.max(t)),
                sources: vec![start],
            });
        }
    }
    spans
}

/// Deactivate-to-reactivate spans of a binary predicate, per sensor.
fn gap_spans(events: &[SensorEvent], pred: &SensorPredicate) -> Vec<Span> {
    let mut spans = Vec::new();
    for indices in per_sensor(events, pred).values() {
        let mut active = false;
        let mut left: Option<usize> = None;
        for &i in indices {
            let e = &events[i];
            if e.is_activation() {
                if let (false, Some(d)) = (active, left) {
                    let t = events[d].timestamp;
                    spans.push(Span {
                        start: t,
                        end: ensure_positive(t, e.timestamp),
                        sources: vec![d, i],
                    });
                }
                active = true;
                left = None;
            } else if e.is_deactivation() && active {
                active = false;
                left = Some(i);
            }
        }
    }
    spans
}

fn merge_spans(mut spans: Vec<Span>, max_gap: Duration) -> Vec<Span> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut out: Vec<Span> = Vec::new();
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start - last.end <= max_gap => {
                last.end = last.end.max(s.end);
                last.sources.extend(s.sources);
            }
            _ => out.push(s),
        }
    }
    out
}

struct RuleContext<'a> {
    events: &'a [SensorEvent],
    supporting: Vec<usize>,
    absence: Vec<usize>,
}

impl RuleContext<'_> {
    fn within(list: &[usize], events: &[SensorEvent], start: Timestamp, end: Timestamp) -> Vec<usize> {
        let lo = list.partition_point(|&i| events[i].timestamp < start);
        let hi = list.partition_point(|&i| events[i].timestamp <= end);
        list[lo..hi].to_vec()
    }

    /// Applies the shared constraints and builds the episode.
    fn finish(&self, rule: &AdlRule, mut span: Span, support_in_span: bool) -> Option<AdlEpisode> {
        let duration = span.end - span.start;
        if duration < chrono_duration(rule.min_duration) || duration > chrono_duration(rule.max_duration) {
            return None;
        }
        if let Some(window) = rule.window {
            if !window.covers(span.start, span.end) {
                return None;
            }
        }
        if support_in_span {
            let support = Self::within(&self.supporting, self.events, span.start, span.end);
            if support.len() < rule.min_support {
                return None;
            }
            span.sources.extend(support);
        }
        if !Self::within(&self.absence, self.events, span.start, span.end).is_empty() {
            return None;
        }
        span.sources.sort_unstable();
        span.sources.dedup();
        Some(AdlEpisode {
            kind: rule.produces,
            start: span.start,
            end: span.end,
            sources: span.sources,
            attributes: BTreeMap::new(),
            route: Vec::new(),
        })
    }
}

fn union_firings(events: &[SensorEvent], preds: &[SensorPredicate]) -> Vec<usize> {
    let set: BTreeSet<usize> = preds.iter().flat_map(|p| firings(events, p)).collect();
    set.into_iter().collect()
}

fn apply_rule(stream: &EventStream, rule: &AdlRule) -> Vec<AdlEpisode> {
    let events = &stream.events[..];
    let ctx = RuleContext {
        events,
        supporting: union_firings(events, &rule.supporting),
        absence: union_firings(events, &rule.absence),
    };
    let max_gap = chrono_duration(rule.max_gap);
    let horizon = stream.horizon();

    match rule.mode {
        RuleMode::Interval => {
            let spans = if rule.trigger.kind.is_binary() {
                binary_spans(events, &rule.trigger, horizon)
            } else {
                continuous_spans(events, &rule.trigger, horizon)
            };
            merge_spans(spans, max_gap)
                .into_iter()
                .filter_map(|s| ctx.finish(rule, s, true))
                .collect()
        }
        RuleMode::Gap => gap_spans(events, &rule.trigger)
            .into_iter()
            .filter_map(|s| ctx.finish(rule, s, true))
            .collect(),
        RuleMode::Cluster => {
            let triggers: BTreeSet<usize> = firings(events, &rule.trigger).into_iter().collect();
            let mut merged: Vec<(usize, bool)> = triggers.iter().map(|&i| (i, true)).collect();
            merged.extend(
                ctx.supporting
                    .iter()
                    .filter(|i| !triggers.contains(i))
                    .map(|&i| (i, false)),
            );
            merged.sort_unstable();

            let mut out = Vec::new();
            let mut open: Option<(Span, usize)> = None;
            for (i, is_trigger) in merged {
                let t = events[i].timestamp;
                match open.as_mut() {
                    Some((span, support)) if t - span.end <= max_gap => {
                        span.end = t;
                        span.sources.push(i);
                        if !is_trigger {
                            *support += 1;
                        }
                    }
                    _ => {
                        if let Some(done) = open.take() {
                            out.extend(close_cluster(&ctx, rule, done));
                        }
                        if is_trigger {
                            open = Some((
                                Span {
                                    start: t,
                                    end: t,
                                    sources: vec![i],
                                },
                                0,
                            ));
                        }
                    }
                }
            }
            if let Some(done) = open {
                out.extend(close_cluster(&ctx, rule, done));
            }
            out
        }
        RuleMode::Instant => firings(events, &rule.trigger)
            .into_iter()
            .filter_map(|i| {
                let t = events[i].timestamp;
                let near = RuleContext::within(&ctx.supporting, events, t - max_gap, t + max_gap);
                if near.len() < rule.min_support {
                    return None;
                }
                let start = near.iter().map(|&j| events[j].timestamp).fold(t, Timestamp::min);
                let end = near.iter().map(|&j| events[j].timestamp).fold(t, Timestamp::max);
                let mut sources = near;
                sources.push(i);
                ctx.finish(
                    rule,
                    Span {
                        start,
                        end: ensure_positive(start, end),
                        sources,
                    },
                    false,
                )
            })
            .collect(),
    }
}

fn close_cluster(ctx: &RuleContext<'_>, rule: &AdlRule, (mut span, support): (Span, usize)) -> Option<AdlEpisode> {
    if support < rule.min_support {
        return None;
    }
    span.end = ensure_positive(span.start, span.end);
    ctx.finish(rule, span, false)
}

/// Merges overlapping episodes of the same kind and orders the result.
fn merge_same_kind(mut episodes: Vec<AdlEpisode>) -> Vec<AdlEpisode> {
    episodes.sort_by(|a, b| (a.kind, a.start, a.end).cmp(&(b.kind, b.start, b.end)));
    let mut out: Vec<AdlEpisode> = Vec::new();
    for e in episodes {
        match out.last_mut() {
            Some(last) if last.kind == e.kind && e.start < last.end => {
                last.end = last.end.max(e.end);
                last.sources.extend(e.sources);
                last.sources.sort_unstable();
                last.sources.dedup();
                for (k, v) in e.attributes {
                    last.attributes.entry(k).or_insert(v);
                }
            }
            _ => out.push(e),
        }
    }
    sort_episodes(&mut out);
    out
}

pub fn sort_episodes(episodes: &mut [AdlEpisode]) {
    episodes.sort_by(|a, b| (a.start, a.kind, a.end).cmp(&(b.start, b.kind, b.end)));
}

pub fn check_rules(rules: &[AdlRule]) -> Result<(), SegmentError> {
    for (i, a) in rules.iter().enumerate() {
        for b in &rules[i + 1..] {
            if a.produces == b.produces && a.trigger == b.trigger {
                return Err(SegmentError::RuleConflict {
                    first: a.name.clone(),
                    second: b.name.clone(),
                    kind: a.produces,
                });
            }
        }
    }
    Ok(())
}

/// Applies every rule to a time-sorted stream.
pub fn segment(stream: &EventStream, rules: &[AdlRule]) -> Result<Vec<AdlEpisode>, SegmentError> {
    check_rules(rules)?;
    let episodes = rules.iter().flat_map(|r| apply_rule(stream, r)).collect();
    Ok(merge_same_kind(episodes))
}

/// One episode per pair of consecutive motion activations in different
/// rooms at most `transition_timeout` apart. Pairs with no time between
/// them are treated as simultaneous triggers and skipped.
pub fn detect_room_transitions(
    stream: &EventStream,
    geometry: &SensorGeometry,
    settings: &MovementSettings,
) -> Result<Vec<AdlEpisode>, SegmentError> {
    let timeout = chrono_duration(settings.transition_timeout);
    let gait_floor = chrono_duration(settings.gait_min_gap);
    let mut out = Vec::new();
    let mut prev: Option<(usize, &SensorPlacement)> = None;
    for (i, e) in stream.events.iter().enumerate() {
        if e.kind != SensorKind::Motion {
            continue;
        }
        let place = geometry
            .get(&e.sensor_id)
            .ok_or_else(|| SegmentError::UnknownSensor(e.sensor_id.clone()))?;
        if !e.is_activation() {
            continue;
        }
        if let Some((j, from)) = prev {
            let gap = e.timestamp - stream.events[j].timestamp;
            if from.room != place.room && gap > Duration::zero() && gap <= timeout {
                let mut attributes = BTreeMap::new();
                if gap >= gait_floor {
                    let dist = (place.x - from.x).hypot(place.y - from.y);
                    attributes.insert(
                        "gait_speed".to_string(),
                        dist / (gap.num_milliseconds() as f64 / 1000.0),
                    );
                }
                out.push(AdlEpisode {
                    kind: AdlKind::RoomTransition,
                    start: stream.events[j].timestamp,
                    end: e.timestamp,
                    sources: vec![j, i],
                    attributes,
                    route: vec![from.room.clone(), place.room.clone()],
                });
            }
        }
        prev = Some((i, place));
    }
    Ok(out)
}

/// Maximal runs of night-time transitions, each gap at most
/// `wander_max_gap`, with at least `wander_min_transitions` members and a
/// route that revisits a room.
pub fn detect_wandering(transitions: &[AdlEpisode], settings: &MovementSettings) -> Vec<AdlEpisode> {
    let max_gap = chrono_duration(settings.wander_max_gap);
    let night = settings.night_window;
    let mut out = Vec::new();
    let mut run: Vec<&AdlEpisode> = Vec::new();

    let flush = |run: &mut Vec<&AdlEpisode>, out: &mut Vec<AdlEpisode>| {
        if run.len() >= settings.wander_min_transitions {
            let mut route: Vec<String> = Vec::new();
            for t in run.iter() {
                if route.is_empty() {
                    route.extend(t.route.first().cloned());
                }
                route.extend(t.route.last().cloned());
            }
            let distinct: BTreeSet<&String> = route.iter().collect();
            if distinct.len() < route.len() {
                let mut sources: Vec<usize> = run.iter().flat_map(|t| t.sources.iter().copied()).collect();
                sources.sort_unstable();
                sources.dedup();
                out.push(AdlEpisode {
                    kind: AdlKind::Wandering,
                    start: run[0].start,
                    end: run[run.len() - 1].end,
                    sources,
                    attributes: BTreeMap::from([("transitions".to_string(), run.len() as f64)]),
                    route,
                });
            }
        }
        run.clear();
    };

    for t in transitions.iter().filter(|t| t.kind == AdlKind::RoomTransition) {
        let inside = night.covers(t.start, t.end);
        let continues = run.last().is_some_and(|p| t.start - p.end <= max_gap);
        if !inside || !continues {
            flush(&mut run, &mut out);
        }
        if inside {
            run.push(t);
        }
    }
    flush(&mut run, &mut out);
    out
}

/// Everything the day-level segmentation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub rules: Vec<AdlRule>,
    pub movement: MovementSettings,
}

/// Rule episodes, room transitions and wandering for one day's stream.
pub fn segment_day(
    stream: &EventStream,
    config: &SegmentationConfig,
    geometry: &SensorGeometry,
) -> Result<Vec<AdlEpisode>, SegmentError> {
    let mut episodes = segment(stream, &config.rules)?;
    let transitions = detect_room_transitions(stream, geometry, &config.movement)?;
    episodes.extend(detect_wandering(&transitions, &config.movement));
    episodes.extend(transitions);
    sort_episodes(&mut episodes);
    Ok(episodes)
}
