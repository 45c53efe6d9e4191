//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use adlsense_core::cbr::{global_similarity, retrieve, Case, CaseBase, Label, SimilarityConfig};
use adlsense_core::pipeline::{analyse, build_snapshot, SnapshotInputs};
use adlsense_core::profile::{DailyProfile, FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, MissingReason};
use adlsense_core::radar::{axis_point, render_radar, Colour, RadarSeries, RadarSpec};
use adlsense_core::report::Snapshot;
use adlsense_core::risk::{factor_score, Direction, FactorConfig, RiskFactor};
use adlsense_core::segment::{episodes_to_jsonl, AdlKind};
use adlsense_core::sim::{builtin_scenarios, simulate};
use adlsense_core::AppConfig;
use axum::body::Body;
use axum::http::Request;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Similarity algebra

struct RandomBase {
    schema: FeatureSchema,
    rows: Vec<Vec<Option<f64>>>,
    weights: Vec<f64>,
    null_similarity: f64,
}

fn random_base(rng: &mut ChaCha8Rng) -> RandomBase {
    let n_features = rng.random_range(1..=8);
    let features: Vec<FeatureSpec> = (0..n_features)
        .map(|j| {
            let kind = [FeatureKind::Binary, FeatureKind::Count, FeatureKind::DurationMinutes, FeatureKind::Numeric]
                [rng.random_range(0..4)];
            let range = (kind != FeatureKind::Binary && rng.random_bool(0.5)).then(|| {
                let lo = rng.random_range(0.0..50.0_f64).floor();
                [lo, lo + rng.random_range(1.0..200.0_f64).floor()]
            });
            FeatureSpec { name: format!("f{j}"), kind, range }
        })
        .collect();
    let size = rng.random_range(1..=1000);
    let rows = (0..size)
        .map(|_| {
            features
                .iter()
                .map(|f| {
                    if rng.random_bool(0.08) {
                        return None;
                    }
                    Some(match f.kind {
                        FeatureKind::Binary => f64::from(rng.random_range(0..2u8)),
                        FeatureKind::Count => f64::from(rng.random_range(0..30u8)),
                        _ => rng.random_range(0.0..300.0),
                    })
                })
                .collect()
        })
        .collect();
    let weights = (0..n_features).map(|_| rng.random_range(0.0..3.0)).collect::<Vec<f64>>();
    let weights = if weights.iter().sum::<f64>() > 0.0 { weights } else { vec![1.0; n_features] };
    RandomBase {
        schema: FeatureSchema { features },
        rows,
        weights,
        null_similarity: rng.random_range(0.0..=1.0),
    }
}

fn as_profile(schema: &FeatureSchema, row: &[Option<f64>], id: usize) -> DailyProfile {
    DailyProfile {
        resident_id: format!("r{}", id % 13),
        date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Days::new(id as u64),
        values: schema
            .features
            .iter()
            .zip(row)
            .map(|(f, v)| (f.name.clone(), v.map_or(FeatureValue::Missing(MissingReason::NoSensor), FeatureValue::Value)))
            .collect(),
        provenance: BTreeMap::new(),
    }
}

/// Exhaustive-scan oracle: ranges from hints or the observed spread, then a
/// weighted mean of per-feature similarities for every stored row.
fn oracle_scores(b: &RandomBase, query: &[Option<f64>]) -> Vec<f64> {
    let ranges: Vec<(f64, f64)> = b
        .schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            if let Some([lo, hi]) = f.range {
                return (lo, hi);
            }
            let xs: Vec<f64> = b.rows.iter().filter_map(|r| r[j]).collect();
            if xs.is_empty() {
                return (0.0, 1.0);
            }
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi { (lo, hi) } else { (lo, lo + 1.0) }
        })
        .collect();
    b.rows
        .iter()
        .map(|row| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, f) in b.schema.features.iter().enumerate() {
                let s = match (query[j], row[j]) {
                    (Some(x), Some(y)) if f.kind == FeatureKind::Binary => {
                        if x == y { 1.0 } else { 0.0 }
                    }
                    (Some(x), Some(y)) => (1.0 - (x - y).abs() / (ranges[j].1 - ranges[j].0)).clamp(0.0, 1.0),
                    _ => b.null_similarity,
                };
                num += b.weights[j] * s;
                den += b.weights[j];
            }
            num / den
        })
        .collect()
}

fn similarity_algebra() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20230101);
    let bases = 200;
    let mut largest = 0;
    for trial in 0..bases {
        let b = random_base(&mut rng);
        largest = largest.max(b.rows.len());
        let config = SimilarityConfig {
            weights: b.schema.features.iter().map(|f| f.name.clone()).zip(b.weights.iter().copied()).collect(),
            null_similarity: b.null_similarity,
            k: 5,
            trend_window: 14,
            trend_threshold: 0.7,
        };
        let mut base = CaseBase::new(b.schema.clone());
        for (i, row) in b.rows.iter().enumerate() {
            base.insert(Case {
                case_id: format!("c{i:04}"),
                profile: as_profile(&b.schema, row, i),
                context: BTreeMap::new(),
                label: [Label::Risky, Label::NotRisky, Label::Unlabelled][i % 3],
                label_source: "acceptance".into(),
            })
            .map_err(|e| e.to_string())?;
        }
        let ranges = base.similarity_ranges();

        let qi = rng.random_range(0..b.rows.len());
        let query_row: Vec<Option<f64>> = if rng.random_bool(0.5) {
            b.rows[qi].clone()
        } else {
            random_base_row(&mut rng, &b)
        };
        let query = as_profile(&b.schema, &query_row, 99_999);
        let k = rng.random_range(1..=25);
        let got = retrieve(&query, &base, &config, k, None).map_err(|e| e.to_string())?;
        let oracle = oracle_scores(&b, &query_row);
        let mut want: Vec<(f64, String)> = oracle.iter().enumerate().map(|(i, s)| (*s, format!("c{i:04}"))).collect();
        want.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
        want.truncate(k);
        let got_ids: Vec<&str> = got.neighbours.iter().map(|n| n.case_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|w| w.1.as_str()).collect();
        ensure!(got_ids == want_ids, "base {trial}: order {got_ids:?} != oracle {want_ids:?}");
        for (n, (s, _)) in got.neighbours.iter().zip(&want) {
            ensure!((n.similarity - s).abs() <= 1e-9, "base {trial}: {} scored {} vs oracle {s}", n.case_id, n.similarity);
        }

        for _ in 0..20 {
            let p = &base.cases[rng.random_range(0..base.len())].profile;
            let q = &base.cases[rng.random_range(0..base.len())].profile;
            let pq = global_similarity(p, q, &b.schema, &config, &ranges).map_err(|e| e.to_string())?.score;
            let qp = global_similarity(q, p, &b.schema, &config, &ranges).map_err(|e| e.to_string())?.score;
            ensure!(pq == qp, "base {trial}: asymmetric {pq} vs {qp}");
            ensure!((0.0..=1.0).contains(&pq), "base {trial}: {pq} out of [0, 1]");
            if p.is_null_free() {
                let pp = global_similarity(p, p, &b.schema, &config, &ranges).map_err(|e| e.to_string())?.score;
                ensure!(pp == 1.0, "base {trial}: self-similarity {pp}");
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{bases} bases, largest {largest} cases, {elapsed:.1?}"))
}

fn random_base_row(rng: &mut ChaCha8Rng, b: &RandomBase) -> Vec<Option<f64>> {
    b.schema
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Binary => Some(f64::from(rng.random_range(0..2u8))),
            FeatureKind::Count => Some(f64::from(rng.random_range(0..30u8))),
            _ => Some(rng.random_range(0.0..300.0)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Linear scores

fn linear_scores() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draws = 10_000;
    let tol = 1e-12;
    for i in 0..draws {
        let lower = rng.random_range(-100.0..100.0);
        let width = rng.random_range(1.0..100.0);
        let direction = if rng.random_bool(0.5) { Direction::IncreasingRisk } else { Direction::DecreasingRisk };
        let cfg = FactorConfig { factor: RiskFactor::Sleep, feature: "sleep_duration".into(), lower, upper: lower + width, direction };
        let flip = FactorConfig {
            direction: match direction {
                Direction::IncreasingRisk => Direction::DecreasingRisk,
                Direction::DecreasingRisk => Direction::IncreasingRisk,
            },
            ..cfg.clone()
        };
        let (at_lower, at_upper) = match direction {
            Direction::IncreasingRisk => (0.0, 1.0),
            Direction::DecreasingRisk => (1.0, 0.0),
        };
        ensure!(factor_score(cfg.lower, &cfg) == at_lower, "draw {i}: lower endpoint");
        ensure!(factor_score(cfg.upper, &cfg) == at_upper, "draw {i}: upper endpoint");
        let mid = factor_score((cfg.lower + cfg.upper) / 2.0, &cfg);
        ensure!((mid - 0.5).abs() <= tol, "draw {i}: midpoint {mid}");
        let below = cfg.lower - rng.random_range(0.0..1e4);
        let above = cfg.upper + rng.random_range(0.0..1e4);
        ensure!(factor_score(below, &cfg) == at_lower && factor_score(above, &cfg) == at_upper, "draw {i}: clamp");

        let x = rng.random_range(cfg.lower - width..cfg.upper + width);
        let s = factor_score(x, &cfg);
        ensure!((s + factor_score(x, &flip) - 1.0).abs() <= tol, "draw {i}: inversion");

        let a = rng.random_range(0.5..5.0);
        let b = rng.random_range(-50.0..50.0);
        let moved = FactorConfig { lower: a * cfg.lower + b, upper: a * cfg.upper + b, ..cfg.clone() };
        let t = factor_score(a * x + b, &moved);
        ensure!((t - s).abs() <= tol, "draw {i}: affine change of units moved score {s} to {t}");
    }
    Ok(format!("{draws} draws, tolerance {tol:e}"))
}

// ---------------------------------------------------------------------------
// Segmentation against simulator ground truth

fn segmentation_oracle() -> Verdict {
    let config = AppConfig::default();
    let mut worst = 0;
    let mut days = 0;
    for scenario in builtin_scenarios() {
        ensure!(scenario.days == 30, "{} simulates {} days", scenario.name, scenario.days);
        let first = simulate(&scenario).map_err(|e| e.to_string())?;
        let second = simulate(&scenario).map_err(|e| e.to_string())?;
        ensure!(first.stream.to_jsonl() == second.stream.to_jsonl(), "{}: event streams differ", scenario.name);
        let a = analyse(&first.stream, &config, None).map_err(|e| e.to_string())?;
        let b = analyse(&second.stream, &config, None).map_err(|e| e.to_string())?;
        let dump = |r: &[adlsense_core::pipeline::DayResult]| r.iter().map(|d| episodes_to_jsonl(&d.episodes)).collect::<String>();
        ensure!(dump(&a) == dump(&b), "{}: episodes differ between runs", scenario.name);
        ensure!(a.len() == first.truth.len(), "{}: {} days vs {} truth days", scenario.name, a.len(), first.truth.len());
        for (day, truth) in a.iter().zip(&first.truth) {
            days += 1;
            for kind in AdlKind::ALL.into_iter().filter(|k| *k != AdlKind::ActiveMovement) {
                let got = day.episodes.iter().filter(|e| e.kind == kind).count() as i64;
                let want = truth.count(kind) as i64;
                worst = worst.max((got - want).abs());
                ensure!((got - want).abs() <= 1, "{} {} {kind}: {got} segmented vs {want} true", scenario.name, day.date);
            }
        }
    }
    Ok(format!("{days} scenario-days, worst per-kind difference {worst}, byte-identical reruns"))
}

// ---------------------------------------------------------------------------
// Flagged-resident narrative, end to end through the binary

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_adlsense")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn flag_shares(dir: &Path, scenario: &str, config: &str) -> Result<(usize, BTreeMap<String, usize>, usize, usize), String> {
    let events = dir.join(format!("{scenario}.jsonl"));
    let out = dir.join(scenario);
    run_cli(&["simulate", "--scenario", scenario, "--out", events.to_str().unwrap()])?;
    run_cli(&["pipeline", "--config", config, "--events", events.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    let text = std::fs::read_to_string(out.join("risks.jsonl")).map_err(|e| e.to_string())?;
    let mut per_factor = BTreeMap::new();
    let (mut days, mut both, mut any) = (0, 0, 0);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let flags: Vec<String> = v["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
        days += 1;
        if flags.iter().any(|f| f == "Sleep") && flags.iter().any(|f| f == "Toilet") {
            both += 1;
        }
        if !flags.is_empty() {
            any += 1;
        }
        for f in flags {
            *per_factor.entry(f).or_insert(0) += 1;
        }
    }
    Ok((days, per_factor, both, any))
}

fn narrative() -> Verdict {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "").map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap();

    let (days, per_factor, both, _) = flag_shares(dir.path(), "poor_sleep_frequent_toilet", config)?;
    ensure!(days == 30, "poor sleep: {days} days");
    ensure!(both * 5 >= days * 4, "Sleep and Toilet both flagged on only {both}/{days} days");
    for (factor, n) in &per_factor {
        if factor != "Sleep" && factor != "Toilet" {
            ensure!(n * 5 <= days, "{factor} flagged on {n}/{days} days");
        }
    }
    let (healthy_days, _, _, healthy_flagged) = flag_shares(dir.path(), "steady_healthy", config)?;
    ensure!(healthy_flagged == 0, "steady_healthy flagged on {healthy_flagged}/{healthy_days} days");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "Sleep+Toilet on {both}/{days} days, flags per factor {per_factor:?}, steady 0/{healthy_days}, {elapsed:.1?}"
    ))
}

// ---------------------------------------------------------------------------
// Self-trend

fn self_trend(snap: &Snapshot) -> Verdict {
    let v = snap.self_similarity_json("gradual_decline", None).map_err(|e| e.to_string())?;
    let points = v["points"].as_array().unwrap();
    let window = snap.config.similarity.trend_window;
    let days = snap.residents["gradual_decline"].profiles.len();
    ensure!(points.len() == days - window, "{} points for {days} days", points.len());
    let flagged = |p: &[Value]| p.iter().filter(|x| x["flag"] == true).count();
    let first_week = flagged(&points[..7]);
    let last_week = flagged(&points[points.len() - 7..]);
    ensure!(first_week == 0, "{first_week} flags in the first week after warm-up");
    ensure!(last_week >= 1, "no flags in the final week");
    let first = points[0]["self_similarity"].as_f64().unwrap();
    let last = points[points.len() - 1]["self_similarity"].as_f64().unwrap();
    Ok(format!("first week 0 flags, final week {last_week} flags, self-similarity {first:.3} -> {last:.3}"))
}

// ---------------------------------------------------------------------------
// Rendering

fn check_chart(spec: &RadarSpec, svg: &str) -> Result<(), String> {
    let doc = roxmltree::Document::parse(svg).map_err(|e| format!("not XML: {e}"))?;
    let axes: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("axis")).collect();
    ensure!(axes.len() == 6, "{} axes", axes.len());
    let order: Vec<String> = axes.iter().map(|n| n.attribute("data-factor").unwrap_or("").to_string()).collect();
    let expected: Vec<String> = RiskFactor::ALL.iter().map(|f| f.to_string()).collect();
    ensure!(order == expected, "axis order {order:?}");
    let labels: Vec<&str> = doc.descendants().filter(|n| n.attribute("class") == Some("axis-label")).filter_map(|n| n.text()).collect();
    let expected_labels: Vec<&str> = RiskFactor::ALL.iter().map(|f| f.label()).collect();
    ensure!(labels == expected_labels, "labels {labels:?}");
    let (cx, cy) = spec.center();
    let r = spec.radius();
    let polygons: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("series")).collect();
    ensure!(polygons.len() == spec.series.len(), "{} polygons for {} series", polygons.len(), spec.series.len());
    for poly in polygons {
        let i: usize = poly.attribute("data-series").unwrap().parse().map_err(|_| "bad data-series")?;
        let scores = spec.series[i].scores;
        let pts: Vec<(f64, f64)> = poly
            .attribute("points")
            .unwrap()
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        ensure!(pts.len() == 6, "{} vertices", pts.len());
        for (axis, (x, y)) in pts.into_iter().enumerate() {
            let want = scores[axis].unwrap_or(0.0) * r;
            let got = (x - cx).hypot(y - cy);
            ensure!((got - want).abs() <= 0.5, "series {i} axis {axis}: radius {got} vs {want}");
        }
    }
    Ok(())
}

fn rendering(snap: &Snapshot) -> Verdict {
    let mut charts = 0;
    for (id, history) in &snap.residents {
        for p in &history.profiles {
            for overlays in [vec![], vec![adlsense_core::report::Overlay::Risky], vec![adlsense_core::report::Overlay::Risky, adlsense_core::report::Overlay::History]] {
                let spec = snap.radar_spec(id, Some(p.date), &overlays).map_err(|e| e.to_string())?;
                let svg = render_radar(&spec).map_err(|e| e.to_string())?;
                check_chart(&spec, &svg).map_err(|e| format!("{id} {}: {e}", p.date))?;
                charts += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..1000 {
        let series = (0..rng.random_range(1..=4))
            .map(|s| RadarSeries {
                label: format!("series <{s}> & co"),
                scores: std::array::from_fn(|_| rng.random_bool(0.9).then(|| rng.random_range(0.0..=1.0))),
                colour: [Colour::Resident, Colour::Risky, Colour::Historical][s % 3],
                fill_opacity: 0.2,
            })
            .collect();
        let mut spec = RadarSpec::new(series);
        spec.size_px = rng.random_range(200..1600);
        let svg = render_radar(&spec).map_err(|e| e.to_string())?;
        check_chart(&spec, &svg).map_err(|e| format!("random chart {n}: {e}"))?;
        charts += 1;
    }
    Ok(format!("{charts} charts"))
}

// ---------------------------------------------------------------------------
// API replay

struct Api {
    router: axum::Router,
    rt: tokio::runtime::Runtime,
}

impl Api {
    fn get(&self, uri: &str) -> Result<(u16, Vec<u8>), String> {
        self.rt.block_on(async {
            let response = self
                .router
                .clone()
                .oneshot(Request::get(uri).body(Body::empty()).unwrap())
                .await
                .map_err(|e| e.to_string())?;
            let status = response.status().as_u16();
            let body = response.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec();
            Ok((status, body))
        })
    }

    fn json(&self, uri: &str) -> Result<Value, String> {
        let (status, body) = self.get(uri)?;
        ensure!(status == 200, "{uri}: status {status}");
        serde_json::from_slice(&body).map_err(|e| format!("{uri}: {e}"))
    }
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn same(field: &str, got: &Value, want: Option<f64>, checked: &mut usize) -> Result<(), String> {
    *checked += 1;
    ensure!(num(got) == want, "{field}: API {got} vs recomputed {want:?}");
    Ok(())
}

fn api_replay(snap: &Snapshot) -> Verdict {
    let api = Api {
        router: adlsense_service::router(adlsense_service::ServiceState::new(Some(snap.clone()), None), false),
        rt: tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?,
    };
    let config = AppConfig::default();
    let mut checked = 0usize;

    // Ground truth rebuilt from scratch, independent of the snapshot.
    let mut profiles: BTreeMap<String, Vec<DailyProfile>> = BTreeMap::new();
    for scenario in builtin_scenarios() {
        let sim = simulate(&scenario).map_err(|e| e.to_string())?;
        let days = analyse(&sim.stream, &config, None).map_err(|e| e.to_string())?;
        profiles.insert(scenario.name.clone(), days.into_iter().map(|d| d.profile).collect());
    }
    let ranges = snap.casebase.similarity_ranges();

    let residents = api.json("/api/residents")?;
    for r in residents.as_array().unwrap() {
        let id = r["resident_id"].as_str().unwrap();
        same("days_available", &r["days_available"], Some(profiles[id].len() as f64), &mut checked)?;
    }

    for (id, days) in &profiles {
        for p in days {
            let d = p.date;
            let profile = api.json(&format!("/api/residents/{id}/profile?date={d}"))?;
            for (name, value) in &p.values {
                same(&format!("{id} {d} profile {name}"), &profile["features"][name], value.value(), &mut checked)?;
            }

            let risk = api.json(&format!("/api/residents/{id}/risk?date={d}"))?;
            let mut flags = Vec::new();
            for cfg in &config.factors {
                let f = cfg.factor.to_string();
                let score = p.get(&cfg.feature).map(|x| factor_score(x, cfg));
                same(&format!("{id} {d} score {f}"), &risk["scores"][&f], score, &mut checked)?;
                same(&format!("{id} {d} source {f}"), &risk["sources"][&f]["value"], p.get(&cfg.feature), &mut checked)?;
                same("lower", &risk["sources"][&f]["lower"], Some(cfg.lower), &mut checked)?;
                same("upper", &risk["sources"][&f]["upper"], Some(cfg.upper), &mut checked)?;
                let level = config.template.scores[&cfg.factor];
                same("template", &risk["template"]["scores"][&f], Some(level), &mut checked)?;
                if score.is_some_and(|s| s >= level) {
                    flags.push(f);
                }
            }
            flags.sort_by_key(|f| RiskFactor::ALL.iter().position(|x| x.to_string() == *f));
            let api_flags: Vec<String> = risk["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
            ensure!(api_flags == flags, "{id} {d}: flags {api_flags:?} vs {flags:?}");

            let similar = api.json(&format!("/api/residents/{id}/similar?date={d}&k=5"))?;
            let mut oracle: Vec<(f64, &Case)> = snap
                .casebase
                .cases
                .iter()
                .map(|c| Ok((global_similarity(p, &c.profile, &config.schema, &config.similarity, &ranges)?.score, c)))
                .collect::<Result<_, adlsense_core::cbr::CbrError>>()
                .map_err(|e| e.to_string())?;
            oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.case_id.cmp(&b.1.case_id)));
            oracle.truncate(5);
            let neighbours = similar["neighbours"].as_array().unwrap();
            ensure!(neighbours.len() == oracle.len(), "{id} {d}: {} neighbours", neighbours.len());
            let (mut risky, mut labelled) = (0.0, 0.0);
            for (n, (s, case)) in neighbours.iter().zip(&oracle) {
                ensure!(n["case_id"] == case.case_id.as_str(), "{id} {d}: neighbour {} vs {}", n["case_id"], case.case_id);
                same("similarity", &n["similarity"], Some(*s), &mut checked)?;
                let local = global_similarity(p, &case.profile, &config.schema, &config.similarity, &ranges).map_err(|e| e.to_string())?;
                for (name, v) in &local.per_feature {
                    same("per_feature", &n["per_feature"][name], Some(*v), &mut checked)?;
                }
                match case.label {
                    Label::Risky => {
                        risky += s;
                        labelled += s;
                    }
                    Label::NotRisky => labelled += s,
                    Label::Unlabelled => {}
                }
            }
            let vote = if labelled > 0.0 { risky / labelled } else { 0.0 };
            same("vote_score", &similar["vote_score"], Some(vote), &mut checked)?;
            same("k", &similar["k"], Some(5.0), &mut checked)?;

            let (status, svg) = api.get(&format!("/api/residents/{id}/radar.svg?date={d}&overlay=risky"))?;
            ensure!(status == 200, "radar status {status}");
            let svg = String::from_utf8(svg).map_err(|e| e.to_string())?;
            let spec = RadarSpec::new(vec![]);
            let first = svg
                .lines()
                .find(|l| l.contains(r#"data-series="0""#))
                .ok_or("no resident polygon")?;
            let expected: Vec<String> = RiskFactor::ALL
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let cfg = config.factor(*f).unwrap();
                    let s = p.get(&cfg.feature).map(|x| factor_score(x, cfg)).unwrap_or(0.0);
                    let (x, y) = axis_point(i, s, spec.center(), spec.radius());
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            checked += 12;
            ensure!(first.contains(&format!(r#"points="{}""#, expected.join(" "))), "{id} {d}: radar vertices differ");
        }

        for f in RiskFactor::ALL {
            let trend = api.json(&format!("/api/residents/{id}/trend?factor={f}"))?;
            let cfg = config.factor(f).unwrap();
            same("template_level", &trend["template_level"], Some(config.template.scores[&f]), &mut checked)?;
            for (pt, p) in trend["points"].as_array().unwrap().iter().zip(days) {
                same(&format!("{id} trend {f}"), &pt["score"], p.get(&cfg.feature).map(|x| factor_score(x, cfg)), &mut checked)?;
            }
        }

        let selfsim = api.json(&format!("/api/residents/{id}/self-similarity"))?;
        let w = config.similarity.trend_window;
        same("window", &selfsim["window"], Some(w as f64), &mut checked)?;
        same("threshold", &selfsim["threshold"], Some(config.similarity.trend_threshold), &mut checked)?;
        let points = selfsim["points"].as_array().unwrap();
        ensure!(points.len() == days.len().saturating_sub(w), "{id}: {} self-similarity points", points.len());
        for (i, pt) in points.iter().enumerate() {
            let day = i + w;
            let mut sum = 0.0;
            for prev in &days[day - w..day] {
                sum += global_similarity(&days[day], prev, &config.schema, &config.similarity, &ranges)
                    .map_err(|e| e.to_string())?
                    .score;
            }
            same(&format!("{id} self-similarity {}", days[day].date), &pt["self_similarity"], Some(sum / w as f64), &mut checked)?;
        }
    }
    Ok(format!("{checked} numeric fields matched exactly; no dashboard involved"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, verdict: Verdict| match verdict {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(reason) => {
            failures += 1;
            println!("FAIL  {name}: {reason}");
        }
    };

    report("similarity algebra", similarity_algebra());
    report("linear scores", linear_scores());
    report("segmentation oracle", segmentation_oracle());
    report("flagged resident narrative", narrative());

    let snapshot = build_snapshot(&AppConfig::default(), &SnapshotInputs { demo: true, ..Default::default() });
    match snapshot {
        Ok(snap) => {
            report("self-trend detection", self_trend(&snap));
            report("rendering", rendering(&snap));
            report("API replay", api_replay(&snap));
        }
        Err(e) => {
            for name in ["self-trend detection", "rendering", "API replay"] {
                report(name, Err(format!("cannot build the seeded snapshot: {e}")));
            }
        }
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
