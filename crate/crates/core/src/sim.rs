//! Deterministic synthetic residents.
//!
//! A [`Scenario`] describes a home and a daily schedule of activity blocks
//! with Gaussian timing jitter; [`simulate`] turns it into a sensor event
//! stream together with the ground-truth episodes it enacted.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`. Gaussian draws use Box–Muller on two uniform
//! draws, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`, redrawn while `|z| > 3`.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration as StdDuration;

use chrono::{DateTime, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::TimeOfDay;
use crate::event::{EventStream, SensorEvent, SensorKind, Timestamp};
use crate::segment::{AdlEpisode, AdlKind, SensorGeometry, SensorPlacement};

const BUILTIN_SCENARIOS: &str = include_str!("../config/scenarios.toml");

const MINUTE: i64 = 60_000;
const DAY: i64 = 1440 * MINUTE;
/// Quiet time left between consecutive day blocks.
const BLOCK_GAP: i64 = 6 * MINUTE;
/// Quiet time left between consecutive night events.
const NIGHT_GAP: i64 = 25 * MINUTE;
const MAX_NIGHT_EXIT: i64 = 8 * MINUTE;
const SAMPLE_PERIOD: i64 = MINUTE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario `{scenario}`: {reason}")]
    InvalidScenario { scenario: String, reason: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimActivity {
    Sleep,
    /// Bed exit with a trip to the toilet, inside the sleep block.
    NightToilet,
    /// Restless bed exit without leaving the bedroom.
    BedExit,
    /// Bed exit with a walk through several rooms.
    NightWander,
    Toilet,
    Shower,
    Grooming,
    Cooking,
    Snack,
    Sitting,
    Walk,
}

impl SimActivity {
    fn is_night(self) -> bool {
        matches!(self, SimActivity::NightToilet | SimActivity::BedExit | SimActivity::NightWander)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityBlock {
    /// Name used by drift entries; defaults to the activity token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub activity: SimActivity,
    pub start: TimeOfDay,
    #[serde(default, with = "humantime_serde")]
    pub start_sd: StdDuration,
    /// Repeated occurrences are spread evenly over this span after `start`.
    #[serde(default, with = "humantime_serde")]
    pub spread: StdDuration,
    #[serde(with = "humantime_serde")]
    pub duration: StdDuration,
    #[serde(default, with = "humantime_serde")]
    pub duration_sd: StdDuration,
    #[serde(default = "one")]
    pub probability: f64,
    /// Expected occurrences per day; the fractional part is a coin flip.
    #[serde(default = "one")]
    pub repeat: f64,
}

impl ActivityBlock {
    pub fn block_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            serde_json::to_value(self.activity)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftParam {
    /// Minutes per day.
    Start,
    StartSd,
    Duration,
    DurationSd,
    Probability,
    Repeat,
    /// m/s per day; `block` is ignored.
    GaitSpeed,
}

/// Linear per-day change of one block parameter from `from_day` onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drift {
    #[serde(default)]
    pub block: String,
    pub param: DriftParam,
    pub per_day: f64,
    #[serde(default)]
    pub from_day: u32,
}

impl Drift {
    fn amount(&self, day: u32) -> f64 {
        self.per_day * f64::from(day.saturating_sub(self.from_day))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

/// Rooms (with motion sensor positions) and the doors between them. The
/// rooms `bedroom`, `bathroom`, `kitchen` and `living` must exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeLayout {
    pub rooms: Vec<Room>,
    pub doors: Vec<[String; 2]>,
}

impl Default for HomeLayout {
    fn default() -> Self {
        let room = |name: &str, x, y| Room {
            name: name.into(),
            x,
            y,
        };
        let door = |a: &str, b: &str| [a.to_string(), b.to_string()];
        HomeLayout {
            rooms: vec![
                room("hall", 0.0, 0.0),
                room("bedroom", -4.0, 0.0),
                room("bathroom", -4.0, -3.5),
                room("kitchen", 4.0, 0.0),
                room("living", 0.0, 4.5),
            ],
            doors: vec![
                door("hall", "bedroom"),
                door("hall", "bathroom"),
                door("hall", "kitchen"),
                door("hall", "living"),
                door("bedroom", "bathroom"),
                door("kitchen", "living"),
            ],
        }
    }
}

/// A fixed appliance sensor of the simulated home.
struct Fixture {
    id: &'static str,
    kind: SensorKind,
    room: &'static str,
}

const FIXTURES: [Fixture; 6] = [
    Fixture { id: "bed.pressure", kind: SensorKind::Pressure, room: "bedroom" },
    Fixture { id: "chair.living", kind: SensorKind::Pressure, room: "living" },
    Fixture { id: "float.toilet", kind: SensorKind::Float, room: "bathroom" },
    Fixture { id: "humidity.bathroom", kind: SensorKind::Humidity, room: "bathroom" },
    Fixture { id: "meter.main", kind: SensorKind::Power, room: "kitchen" },
    Fixture { id: "contact.fridge", kind: SensorKind::Contact, room: "kitchen" },
];

impl HomeLayout {
    fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn motion_sensor(room: &str) -> String {
        format!("motion.{room}")
    }

    /// Motion sensor placements, keyed by sensor id.
    pub fn geometry(&self) -> SensorGeometry {
        self.rooms
            .iter()
            .map(|r| {
                (
                    Self::motion_sensor(&r.name),
                    SensorPlacement {
                        room: r.name.clone(),
                        x: r.x,
                        y: r.y,
                    },
                )
            })
            .collect()
    }

    /// Every installed sensor as `(id, kind, room, x, y)`.
    pub fn sensors(&self) -> Vec<(String, SensorKind, String, f64, f64)> {
        let mut out: Vec<_> = self
            .rooms
            .iter()
            .map(|r| (Self::motion_sensor(&r.name), SensorKind::Motion, r.name.clone(), r.x, r.y))
            .collect();
        for f in &FIXTURES {
            if let Some(r) = self.room(f.room) {
                out.push((f.id.to_string(), f.kind, r.name.clone(), r.x, r.y));
            }
        }
        out
    }

    fn neighbours(&self, room: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .doors
            .iter()
            .filter_map(|[a, b]| {
                if a == room {
                    Some(b.as_str())
                } else if b == room {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Shortest door path, inclusive of both ends.
    fn path(&self, from: &str, to: &str) -> Vec<String> {
        let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(cur) = queue.pop_front() {
            if cur == to {
                break;
            }
            for n in self.neighbours(cur) {
                if !prev.contains_key(n) {
                    prev.insert(n, cur);
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![to.to_string()];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur.to_string());
        }
        path.reverse();
        path
    }

    fn distance(&self, a: &str, b: &str) -> f64 {
        match (self.room(a), self.room(b)) {
            (Some(a), Some(b)) => (a.x - b.x).hypot(a.y - b.y),
            _ => 0.0,
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for required in ["bedroom", "bathroom", "kitchen", "living"] {
            if self.room(required).is_none() {
                out.push(format!("home has no `{required}`"));
            }
        }
        for [a, b] in &self.doors {
            if self.room(a).is_none() || self.room(b).is_none() {
                out.push(format!("door {a}-{b} names an unknown room"));
            }
        }
        if out.is_empty() {
            for r in &self.rooms {
                if self.path(&self.rooms[0].name, &r.name).len() < 2 && r.name != self.rooms[0].name {
                    out.push(format!("room `{}` is unreachable", r.name));
                }
            }
            for [a, b] in &self.doors {
                if self.distance(a, b) < 1.0 {
                    out.push(format!("rooms {a} and {b} are closer than 1 m"));
                }
            }
        }
        out
    }
}

fn default_cutoff() -> TimeOfDay {
    TimeOfDay::hm(21, 45)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub days: u32,
    pub start_date: NaiveDate,
    /// Profile-day boundary the schedule is laid out against.
    #[serde(default = "default_day_start")]
    pub day_start: TimeOfDay,
    #[serde(default)]
    pub home: HomeLayout,
    pub gait_speed: Gaussian,
    /// Latest end time for evening blocks that move between rooms.
    #[serde(default = "default_cutoff")]
    pub evening_cutoff: TimeOfDay,
    pub blocks: Vec<ActivityBlock>,
    #[serde(default)]
    pub drift: Vec<Drift>,
}

fn default_day_start() -> TimeOfDay {
    TimeOfDay::hm(12, 0)
}

#[derive(Debug, Deserialize)]
struct ScenarioFile {
    scenarios: Vec<Scenario>,
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    toml::from_str::<ScenarioFile>(BUILTIN_SCENARIOS)
        .expect("built-in scenarios parse")
        .scenarios
}

pub fn find_scenario(name: &str, extra: &[Scenario]) -> Result<Scenario, SimError> {
    extra
        .iter()
        .cloned()
        .chain(builtin_scenarios())
        .find(|s| s.name == name)
        .ok_or_else(|| SimError::UnknownScenario(name.to_string()))
}

#[derive(Debug, Clone, Copy)]
struct BlockParams {
    start: f64,
    start_sd: f64,
    spread: f64,
    duration: f64,
    duration_sd: f64,
    probability: f64,
    repeat: f64,
}

fn minutes(d: StdDuration) -> f64 {
    d.as_secs_f64() / 60.0
}

impl Scenario {
    fn params(&self, block: &ActivityBlock, day: u32) -> BlockParams {
        let mut p = BlockParams {
            start: block.start.millis() as f64 / MINUTE as f64,
            start_sd: minutes(block.start_sd),
            spread: minutes(block.spread),
            duration: minutes(block.duration),
            duration_sd: minutes(block.duration_sd),
            probability: block.probability,
            repeat: block.repeat,
        };
        let name = block.block_name();
        for d in self.drift.iter().filter(|d| d.block == name) {
            let a = d.amount(day);
            match d.param {
                DriftParam::Start => p.start += a,
                DriftParam::StartSd => p.start_sd += a,
                DriftParam::Duration => p.duration += a,
                DriftParam::DurationSd => p.duration_sd += a,
                DriftParam::Probability => p.probability += a,
                DriftParam::Repeat => p.repeat += a,
                DriftParam::GaitSpeed => {}
            }
        }
        p.probability = p.probability.clamp(0.0, 1.0);
        p
    }

    fn gait(&self, day: u32) -> Gaussian {
        let shift: f64 = self
            .drift
            .iter()
            .filter(|d| d.param == DriftParam::GaitSpeed)
            .map(|d| d.amount(day))
            .sum();
        Gaussian {
            mean: self.gait_speed.mean + shift,
            sd: self.gait_speed.sd,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.home.problems();
        if self.days == 0 {
            out.push("days must be positive".into());
        }
        if !(self.gait_speed.sd >= 0.0) {
            out.push("gait_speed.sd must be non-negative".into());
        }
        let names: Vec<String> = self.blocks.iter().map(ActivityBlock::block_name).collect();
        for d in &self.drift {
            if d.param != DriftParam::GaitSpeed && !names.contains(&d.block) {
                out.push(format!("drift names unknown block `{}`", d.block));
            }
        }
        if self.blocks.iter().filter(|b| b.activity == SimActivity::Sleep).count() > 1 {
            out.push("at most one sleep block".into());
        }
        for day in [0, self.days.saturating_sub(1)] {
            for b in &self.blocks {
                let p = self.params(b, day);
                let raw = b.probability
                    + self
                        .drift
                        .iter()
                        .filter(|d| d.block == b.block_name() && d.param == DriftParam::Probability)
                        .map(|d| d.amount(day))
                        .sum::<f64>();
                if !(0.0..=1.0).contains(&b.probability) {
                    out.push(format!("block `{}`: probability {} outside [0, 1]", b.block_name(), b.probability));
                }
                if raw < -1e-9 {
                    out.push(format!("block `{}`: drift drives probability below 0", b.block_name()));
                }
                if p.start_sd < 0.0 || p.duration_sd < 0.0 {
                    out.push(format!("block `{}`: sigma must be non-negative on day {day}", b.block_name()));
                }
                if p.duration < 0.0 || p.repeat < 0.0 || p.spread < 0.0 {
                    out.push(format!("block `{}`: drift makes a mean negative on day {day}", b.block_name()));
                }
            }
            if self.gait(day).mean <= 0.0 {
                out.push(format!("gait speed mean not positive on day {day}"));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Sampled value with mean and sigma, Box–Muller, truncated at ±3σ.
fn gaussian(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if z.abs() <= 3.0 {
            return mean + sd * z;
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    rng.random_range(lo..=hi)
}

#[derive(Debug, Clone)]
struct Occurrence {
    activity: SimActivity,
    /// Milliseconds since the day start.
    start: i64,
    duration: i64,
}

#[derive(Debug, Clone)]
struct PendingEvent {
    sensor: String,
    kind: SensorKind,
    t: i64,
    value: f64,
    location: String,
    truth: Vec<usize>,
}

#[derive(Debug, Clone)]
struct TruthEpisode {
    kind: AdlKind,
    start: i64,
    end: i64,
    route: Vec<String>,
}

/// Ground truth for one profile day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub episodes: Vec<AdlEpisode>,
}

impl DayTruth {
    pub fn count(&self, kind: AdlKind) -> usize {
        self.episodes.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub stream: EventStream,
    pub truth: Vec<DayTruth>,
}

impl Simulation {
    pub fn truth_jsonl(&self) -> String {
        let mut out = String::new();
        for day in &self.truth {
            for e in &day.episodes {
                out.push_str(&e.to_json_line());
                out.push('\n');
            }
        }
        out
    }
}

struct World<'a> {
    rng: ChaCha8Rng,
    home: &'a HomeLayout,
    room: String,
    gait: f64,
    events: Vec<PendingEvent>,
    truth: Vec<TruthEpisode>,
    showers: Vec<(i64, i64)>,
    cooking: Vec<(i64, i64)>,
}

impl World<'_> {
    fn open(&mut self, kind: AdlKind, start: i64) -> usize {
        self.truth.push(TruthEpisode {
            kind,
            start,
            end: start,
            route: Vec::new(),
        });
        self.truth.len() - 1
    }

    fn emit(&mut self, sensor: &str, kind: SensorKind, t: i64, value: f64, location: &str, truth: &[usize]) {
        self.events.push(PendingEvent {
            sensor: sensor.to_string(),
            kind,
            t,
            value,
            location: location.to_string(),
            truth: truth.to_vec(),
        });
    }

    /// Motion pulse in the current room: activation, release a second later.
    fn motion(&mut self, t: i64, truth: &[usize]) {
        let room = self.room.clone();
        let sensor = HomeLayout::motion_sensor(&room);
        self.emit(&sensor, SensorKind::Motion, t, 1.0, &room, truth);
        self.emit(&sensor, SensorKind::Motion, t + 1000, 0.0, &room, &[]);
    }

    fn fixture(&mut self, id: &str, t: i64, value: f64, truth: &[usize]) {
        let f = FIXTURES.iter().find(|f| f.id == id).expect("known fixture");
        self.emit(f.id, f.kind, t, value, f.room, truth);
    }

    /// Walks to `to` leaving at `t`; returns the arrival time. Every hop is
    /// one transition episode, sourced by the activations at either end.
    fn move_to(&mut self, to: &str, t: i64, also: &[usize]) -> i64 {
        if self.room == to {
            return t;
        }
        let path = self.home.path(&self.room, to);
        let mut times = vec![t];
        for hop in path.windows(2) {
            let secs = self.home.distance(&hop[0], &hop[1]) / self.gait;
            times.push(times[times.len() - 1] + (secs * 1000.0).round() as i64);
        }
        let hops: Vec<usize> = path
            .windows(2)
            .enumerate()
            .map(|(i, hop)| {
                let id = self.open(AdlKind::RoomTransition, times[i]);
                self.truth[id].end = times[i + 1];
                self.truth[id].route = hop.to_vec();
                id
            })
            .collect();
        for (i, room) in path.iter().enumerate() {
            let mut tags = also.to_vec();
            if i > 0 {
                tags.push(hops[i - 1]);
            }
            if i < hops.len() {
                tags.push(hops[i]);
            }
            self.room = room.clone();
            self.motion(times[i], &tags);
        }
        times[times.len() - 1]
    }
}

/// Day-block placement within `[lo, hi)`; returns placed occurrences.
fn place_sequential(mut occ: Vec<Occurrence>, lo: i64, hi: i64, move_cutoff: i64, gap: i64) -> Vec<Occurrence> {
    occ.sort_by_key(|o| (o.start, o.activity as u8));
    let mut out = Vec::new();
    let mut free = lo;
    for mut o in occ {
        o.start = o.start.max(free);
        let end = o.start + o.duration;
        if o.activity == SimActivity::Sitting {
            if o.start > move_cutoff || o.start + 5 * MINUTE > hi {
                continue;
            }
            o.duration = o.duration.min(hi - o.start);
        } else if end > move_cutoff.min(hi) {
            continue;
        }
        free = o.start + o.duration + gap;
        out.push(o);
    }
    out
}

pub fn simulate(scenario: &Scenario) -> Result<Simulation, SimError> {
    let problems = scenario.problems();
    if !problems.is_empty() {
        return Err(SimError::InvalidScenario {
            scenario: scenario.name.clone(),
            reason: problems.join("; "),
        });
    }
    let mut world = World {
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        home: &scenario.home,
        room: "living".to_string(),
        gait: scenario.gait_speed.mean,
        events: Vec::new(),
        truth: Vec::new(),
        showers: Vec::new(),
        cooking: Vec::new(),
    };
    let day_start_ms = scenario.day_start.millis();
    let to_offset = |tod_min: f64| -> i64 {
        ((tod_min * MINUTE as f64).round() as i64 - day_start_ms).rem_euclid(DAY)
    };
    let cutoff = to_offset(scenario.evening_cutoff.millis() as f64 / MINUTE as f64);

    for day in 0..scenario.days {
        let base = i64::from(day) * DAY;
        let g = scenario.gait(day);
        world.gait = gaussian(&mut world.rng, g.mean, g.sd).max(0.3);

        let mut sleep: Option<Occurrence> = None;
        let mut day_occ = Vec::new();
        let mut night_occ = Vec::new();
        for block in &scenario.blocks {
            let p = scenario.params(block, day);
            let whole = p.repeat.floor();
            let extra = world.rng.random::<f64>() < p.repeat - whole;
            let n = whole as usize + usize::from(extra);
            for j in 0..n {
                let happens = world.rng.random::<f64>() < p.probability;
                let jitter = gaussian(&mut world.rng, 0.0, p.start_sd);
                let dur = gaussian(&mut world.rng, p.duration, p.duration_sd);
                if !happens {
                    continue;
                }
                let slot = if n > 1 { p.spread * (j as f64 + 0.5) / n as f64 } else { 0.0 };
                let o = Occurrence {
                    activity: block.activity,
                    start: to_offset(p.start + slot + jitter),
                    duration: planned_duration(block.activity, dur),
                };
                match block.activity {
                    SimActivity::Sleep => sleep = Some(o),
                    a if a.is_night() => night_occ.push(o),
                    _ => day_occ.push(o),
                }
            }
        }

        if let Some(s) = &mut sleep {
            s.duration = s.duration.min(DAY - 40 * MINUTE - s.start);
        }
        let (evening, morning) = match &sleep {
            Some(s) => (s.start - 10 * MINUTE, s.start + s.duration + 2 * MINUTE),
            None => (DAY - 10 * MINUTE, DAY),
        };
        let (before, after): (Vec<_>, Vec<_>) = day_occ.into_iter().partition(|o| o.start < evening);
        let mut plan = place_sequential(before, 5 * MINUTE, evening, cutoff.min(evening), BLOCK_GAP);
        plan.extend(place_sequential(after, morning + 3 * MINUTE, DAY - 10 * MINUTE, DAY - 10 * MINUTE, BLOCK_GAP));

        let mut t = base;
        let mut morning_done = sleep.is_none();
        for o in plan {
            if !morning_done && o.start >= morning {
                if let Some(s) = &sleep {
                    t = enact_sleep(&mut world, base, s, &night_occ);
                }
                morning_done = true;
            }
            t = enact(&mut world, (base + o.start).max(t + 30_000), &o);
        }
        if !morning_done {
            if let Some(s) = &sleep {
                enact_sleep(&mut world, base, s, &night_occ);
            }
        }
    }

    Ok(finish(world, scenario))
}

/// Block length in milliseconds, floored so that every activity leaves a
/// recognisable sensor signature.
fn planned_duration(activity: SimActivity, minutes: f64) -> i64 {
    let floor = match activity {
        SimActivity::Toilet => 2.0,
        SimActivity::Shower => 9.0,
        SimActivity::Grooming => 4.0,
        SimActivity::Cooking => 15.0,
        SimActivity::Snack => 2.0,
        SimActivity::Sitting | SimActivity::Walk => 5.0,
        SimActivity::Sleep => 60.0,
        SimActivity::NightToilet | SimActivity::BedExit | SimActivity::NightWander => 2.0,
    };
    (minutes.max(floor) * MINUTE as f64).round() as i64
}

fn enact_sleep(
    world: &mut World<'_>,
    base: i64,
    sleep: &Occurrence,
    night: &[Occurrence],
) -> i64 {
    let leave = base + sleep.start - 90_000;
    let arrive = world.move_to("bedroom", leave, &[]);
    let bed_on = (base + sleep.start).max(arrive + 20_000);
    let bed_off = bed_on + sleep.duration;
    let sleep_id = world.open(AdlKind::Sleep, bed_on);
    world.truth[sleep_id].end = bed_off;
    world.fixture("bed.pressure", bed_on, 1.0, &[sleep_id]);

    let lo = bed_on + 30 * MINUTE;
    let hi = bed_off - 20 * MINUTE;
    let mut events: Vec<Occurrence> = night
        .iter()
        .cloned()
        .map(|mut o| {
            o.start += base;
            o.duration = o.duration.min(MAX_NIGHT_EXIT);
            o
        })
        .collect();
    events.sort_by_key(|o| o.start);
    let mut free = lo;
    let mut restless_slots = Vec::new();
    for o in events {
        let start = o.start.max(free);
        if start + MAX_NIGHT_EXIT > hi {
            continue;
        }
        let back = enact_night(world, start, &o, sleep_id);
        restless_slots.push((start, back));
        free = back + NIGHT_GAP;
    }

    // A couple of in-bed movements away from the exits.
    let fidgets = uniform(&mut world.rng, 1, 2);
    for _ in 0..fidgets {
        let t = uniform(&mut world.rng, bed_on + 15 * MINUTE, bed_off - 15 * MINUTE);
        if restless_slots
            .iter()
            .all(|(a, b)| t < a - 12 * MINUTE || t > b + 12 * MINUTE)
        {
            world.motion(t, &[]);
        }
    }

    world.fixture("bed.pressure", bed_off, 0.0, &[sleep_id]);
    world.motion(bed_off + 5_000, &[]);
    bed_off + 30_000
}

/// One night-time bed exit; returns when the bed is occupied again.
fn enact_night(world: &mut World<'_>, t: i64, o: &Occurrence, sleep_id: usize) -> i64 {
    let exit = world.open(AdlKind::BedExit, t);
    world.fixture("bed.pressure", t, 0.0, &[exit, sleep_id]);
    let back = match o.activity {
        SimActivity::NightToilet => {
            let arrive = world.move_to("bathroom", t + 3_000, &[exit]);
            let visit = world.open(AdlKind::Toileting, arrive);
            let flush = arrive + uniform(&mut world.rng, 40_000, 90_000);
            world.fixture("float.toilet", flush, 1.0, &[visit]);
            world.fixture("float.toilet", flush + 15_000, 0.0, &[]);
            world.motion(flush + 20_000, &[visit]);
            let leave = flush + 40_000;
            world.truth[visit].end = leave;
            let home = world.move_to("bedroom", leave, &[exit]);
            home + 20_000
        }
        SimActivity::NightWander => {
            let wander = world.open(AdlKind::Wandering, t + 3_000);
            let first_transition = world.truth.len();
            let mut now = t + 3_000;
            world.motion(now, &[exit]);
            let rooms = ["hall", "kitchen", "living", "bedroom"];
            let hops = uniform(&mut world.rng, 4, 5);
            for _ in 0..hops {
                let here = world.room.clone();
                let options: Vec<&str> = world
                    .home
                    .neighbours(&here)
                    .into_iter()
                    .filter(|n| rooms.contains(n))
                    .collect();
                let pick = options[uniform(&mut world.rng, 0, options.len() as i64 - 1) as usize].to_string();
                now = world.move_to(&pick, now, &[exit, wander]);
                now += uniform(&mut world.rng, 20_000, 45_000);
                world.motion(now, &[exit, wander]);
                now += 5_000;
            }
            let home = world.move_to("bedroom", now, &[exit, wander]);
            let last_transition = world.truth.len();
            let mut route: Vec<String> = Vec::new();
            for e in &world.truth[first_transition..last_transition] {
                if e.kind == AdlKind::RoomTransition && !e.route.is_empty() {
                    if route.is_empty() {
                        route.push(e.route[0].clone());
                    }
                    route.push(e.route[1].clone());
                }
            }
            let (s, e) = world.truth[first_transition..last_transition]
                .iter()
                .filter(|e| e.kind == AdlKind::RoomTransition)
                .fold((i64::MAX, i64::MIN), |(s, e), x| (s.min(x.start), e.max(x.end)));
            world.truth[wander].start = s;
            world.truth[wander].end = e;
            world.truth[wander].route = route;
            home + 20_000
        }
        _ => {
            world.motion(t + 3_000, &[exit]);
            let end = t + o.duration.clamp(2 * MINUTE, 6 * MINUTE);
            world.motion(t + 60_000, &[exit]);
            end
        }
    };
    world.truth[exit].end = back;
    world.fixture("bed.pressure", back, 1.0, &[exit]);
    back
}

/// Enacts one day block leaving at `t`; returns when it is over.
fn enact(world: &mut World<'_>, t: i64, o: &Occurrence) -> i64 {
    let dur = o.duration;
    match o.activity {
        SimActivity::Toilet => {
            let ta = world.move_to("bathroom", t, &[]);
            let dur = dur.max(2 * MINUTE);
            let id = world.open(AdlKind::Toileting, ta);
            world.motion(ta + 25_000, &[id]);
            let flush = ta + (dur / 2).max(60_000);
            world.fixture("float.toilet", flush, 1.0, &[id]);
            world.fixture("float.toilet", flush + 15_000, 0.0, &[]);
            world.motion(flush + 20_000, &[id]);
            let end = (ta + dur).max(flush + 40_000);
            world.truth[id].end = end;
            end
        }
        SimActivity::Shower => {
            let ta = world.move_to("bathroom", t, &[]);
            let water = (ta + MINUTE, ta + dur - 3 * MINUTE);
            let id = world.open(AdlKind::Shower, water.0);
            world.motion(ta + 30_000, &[id]);
            world.showers.push(water);
            world.motion(ta + dur - 30_000, &[id]);
            world.truth[id].end = water.1;
            ta + dur
        }
        SimActivity::Grooming => {
            let ta = world.move_to("bathroom", t, &[]);
            let dur = dur.max(4 * MINUTE);
            let id = world.open(AdlKind::Grooming, ta);
            let mut now = ta;
            world.truth[id].start = ta;
            loop {
                now += uniform(&mut world.rng, 50_000, 100_000);
                if now > ta + dur - 10_000 {
                    break;
                }
                world.motion(now, &[id]);
            }
            world.truth[id].end = ta + dur;
            ta + dur
        }
        SimActivity::Cooking => {
            let ta = world.move_to("kitchen", t, &[]);
            let dur = dur.max(15 * MINUTE);
            let id = world.open(AdlKind::Cooking, ta);
            world.cooking.push((ta + MINUTE, ta + dur - MINUTE));
            let mut now = ta;
            loop {
                now += uniform(&mut world.rng, 30_000, 90_000);
                if now > ta + dur - 10_000 {
                    break;
                }
                world.motion(now, &[id]);
            }
            world.truth[id].end = ta + dur;
            ta + dur
        }
        SimActivity::Snack => {
            let ta = world.move_to("kitchen", t, &[]);
            let id = world.open(AdlKind::EatingDrinking, ta);
            world.fixture("contact.fridge", ta + 10_000, 1.0, &[id]);
            world.fixture("contact.fridge", ta + 25_000, 0.0, &[]);
            world.motion(ta + 40_000, &[id]);
            world.motion(ta + 100_000, &[id]);
            let leave = ta + 120_000;
            let end = world.move_to("living", leave, &[id]);
            world.truth[id].end = end;
            end
        }
        SimActivity::Sitting => {
            let ta = world.move_to("living", t, &[]);
            let dur = dur.max(5 * MINUTE);
            let on = ta + 15_000;
            let off = ta + dur - 15_000;
            let id = world.open(AdlKind::Sitting, on);
            world.fixture("chair.living", on, 1.0, &[id]);
            let mut now = on;
            loop {
                now += uniform(&mut world.rng, 12 * MINUTE, 18 * MINUTE);
                if now > off - MINUTE {
                    break;
                }
                world.motion(now, &[]);
            }
            world.fixture("chair.living", off, 0.0, &[id]);
            world.truth[id].end = off;
            ta + dur
        }
        SimActivity::Walk => {
            let rooms = ["living", "hall", "bedroom"];
            let mut now = t;
            let end = t + dur;
            while now < end - 3 * MINUTE {
                let here = world.room.clone();
                let options: Vec<&str> = rooms.iter().copied().filter(|r| *r != here).collect();
                let pick = options[uniform(&mut world.rng, 0, options.len() as i64 - 1) as usize];
                now = world.move_to(pick, now, &[]);
                let dwell_end = (now + uniform(&mut world.rng, 8 * MINUTE, 12 * MINUTE)).min(end);
                loop {
                    let next = now + uniform(&mut world.rng, 20_000, 40_000);
                    if next + 5_000 > dwell_end {
                        break;
                    }
                    now = next;
                    world.motion(now, &[]);
                }
                now = dwell_end.max(now + 5_000);
            }
            now.max(end)
        }
        SimActivity::Sleep | SimActivity::NightToilet | SimActivity::BedExit | SimActivity::NightWander => t,
    }
}

fn humidity_at(t: i64, showers: &[(i64, i64)]) -> f64 {
    let mut bump = 0.0;
    for &(s, e) in showers {
        if t < s || t > e + 90 * MINUTE {
            continue;
        }
        let ramp = |x: i64| 30.0 * (1.0 - (-(x as f64) / (1.5 * MINUTE as f64)).exp());
        bump += if t <= e {
            ramp(t - s)
        } else {
            ramp(e - s) * (-((t - e) as f64) / (5.0 * MINUTE as f64)).exp()
        };
    }
    bump
}

fn finish(mut world: World<'_>, scenario: &Scenario) -> Simulation {
    let horizon = i64::from(scenario.days) * DAY;
    let showers = std::mem::take(&mut world.showers);
    let cooking = std::mem::take(&mut world.cooking);
    let mut t = 0;
    while t < horizon {
        let noise = gaussian(&mut world.rng, 0.0, 0.4);
        let h = (45.0 + noise + humidity_at(t, &showers)).max(0.0);
        let h = (h * 10.0).round() / 10.0;
        world.emit("humidity.bathroom", SensorKind::Humidity, t, h, "bathroom", &[]);
        let noise = gaussian(&mut world.rng, 0.0, 10.0);
        let hob = if cooking.iter().any(|&(s, e)| t >= s && t <= e) { 1500.0 } else { 0.0 };
        let w = ((150.0 + noise + hob).max(0.0) * 10.0).round() / 10.0;
        world.emit("meter.main", SensorKind::Power, t, w, "kitchen", &[]);
        t += SAMPLE_PERIOD;
    }

    let origin: Timestamp = scenario
        .start_date
        .and_time(scenario.day_start.0)
        .and_utc();
    let at = |ms: i64| -> Timestamp {
        DateTime::from_timestamp_millis(origin.timestamp_millis() + ms).expect("in range")
    };

    let mut pending = std::mem::take(&mut world.events);
    pending.retain(|e| e.t >= 0 && e.t < horizon);
    pending.sort_by(|a, b| a.t.cmp(&b.t).then_with(|| a.sensor.cmp(&b.sensor)));

    let mut sources: Vec<Vec<usize>> = vec![Vec::new(); world.truth.len()];
    let mut day_first = vec![0usize; scenario.days as usize + 1];
    let mut events = Vec::with_capacity(pending.len());
    let mut day = 0usize;
    for (i, p) in pending.iter().enumerate() {
        while day < scenario.days as usize && p.t >= (day as i64 + 1) * DAY {
            day += 1;
            day_first[day] = i;
        }
        for &id in &p.truth {
            sources[id].push(i);
        }
        events.push(
            SensorEvent::new(p.sensor.clone(), p.kind, at(p.t), p.value, p.location.clone())
                .expect("simulated values are valid"),
        );
    }
    while day < scenario.days as usize {
        day += 1;
        day_first[day] = pending.len();
    }

    let mut truth: Vec<DayTruth> = (0..scenario.days)
        .map(|d| DayTruth {
            date: scenario.start_date + chrono::Duration::days(i64::from(d)),
            episodes: Vec::new(),
        })
        .collect();
    for (id, e) in world.truth.iter().enumerate() {
        if e.end <= e.start || sources[id].is_empty() || e.start < 0 || e.start >= horizon {
            continue;
        }
        let d = (e.start / DAY) as usize;
        let offset = day_first[d];
        truth[d].episodes.push(AdlEpisode {
            kind: e.kind,
            start: at(e.start),
            end: at(e.end),
            sources: sources[id].iter().map(|i| i.saturating_sub(offset)).collect(),
            attributes: BTreeMap::new(),
            route: e.route.clone(),
        });
    }
    for d in &mut truth {
        crate::segment::sort_episodes(&mut d.episodes);
    }

    let mut stream = EventStream::new(scenario.name.clone(), events);
    stream.window = Some((origin, at(horizon)));
    Simulation { stream, truth }
}
