//! Browser bindings for the demo page: score a hand-edited day, compare two
//! days feature by feature, and simulate-and-score one day of a built-in
//! scenario. Every export takes and returns JSON strings.

use std::collections::BTreeMap;

use adlsense_core::cbr::{global_similarity, CaseBase};
use adlsense_core::pipeline::analyse;
use adlsense_core::profile::{DailyProfile, FeatureValue, MissingReason};
use adlsense_core::radar::{render_radar, Colour, RadarSeries, RadarSpec};
use adlsense_core::report::{parse_overlays, Overlay};
use adlsense_core::risk::{compare_to_template, score_profile, RiskFactor, RiskProfile};
use adlsense_core::segment::AdlKind;
use adlsense_core::sim::{builtin_scenarios, find_scenario, simulate};
use adlsense_core::AppConfig;
use chrono::NaiveDate;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Feature values keyed by name; `null` or absent means no data.
type FeatureInput = BTreeMap<String, Option<f64>>;

fn parse_features(text: &str) -> Result<FeatureInput, String> {
    serde_json::from_str(text).map_err(|e| format!("features must be a JSON object of numbers: {e}"))
}

fn to_profile(config: &AppConfig, features: &FeatureInput, label: &str) -> Result<DailyProfile, String> {
    for name in features.keys() {
        if config.schema.get(name).is_none() {
            return Err(format!("unknown feature `{name}`"));
        }
    }
    let mut values = BTreeMap::new();
    for name in config.schema.names() {
        let value = match features.get(name).copied().flatten() {
            Some(x) => {
                config.schema.check_value(name, x).map_err(|e| e.to_string())?;
                FeatureValue::Value(x)
            }
            None => FeatureValue::Missing(MissingReason::NoSensor),
        };
        values.insert(name.to_string(), value);
    }
    Ok(DailyProfile {
        resident_id: label.to_string(),
        date: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        values,
        provenance: BTreeMap::new(),
    })
}

fn risk_of(config: &AppConfig, profile: &DailyProfile) -> Result<RiskProfile, String> {
    let scores = score_profile(profile, &config.factors).map_err(|e| e.to_string())?;
    Ok(compare_to_template(&scores, &config.template))
}

fn radar(config: &AppConfig, risk: &RiskProfile, label: &str, overlays: &[Overlay]) -> Result<String, String> {
    let mut series = vec![RadarSeries {
        label: label.to_string(),
        scores: risk.axis_scores(),
        colour: Colour::Resident,
        fill_opacity: 0.35,
    }];
    if overlays.contains(&Overlay::Risky) {
        series.push(RadarSeries {
            label: "Risky template".into(),
            scores: config.template.axis_scores(),
            colour: Colour::Risky,
            fill_opacity: 0.15,
        });
    }
    let mut spec = RadarSpec::new(series);
    spec.size_px = 480;
    spec.emphasis = risk.flags.iter().copied().collect();
    render_radar(&spec).map_err(|e| e.to_string())
}

fn risk_json(risk: &RiskProfile) -> Value {
    let scores: serde_json::Map<String, Value> = RiskFactor::ALL
        .iter()
        .map(|f| (f.to_string(), json!(risk.scores.get(f).copied().flatten())))
        .collect();
    json!({
        "scores": scores,
        "flags": risk.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
    })
}

/// Factors with their source feature, thresholds and template level.
pub fn factors() -> String {
    let config = AppConfig::default();
    let list: Vec<Value> = RiskFactor::ALL
        .iter()
        .filter_map(|f| config.factor(*f))
        .map(|c| {
            json!({
                "factor": c.factor.to_string(),
                "label": c.factor.label(),
                "feature": c.feature,
                "lower": c.lower,
                "upper": c.upper,
                "direction": c.direction,
                "template": config.template.scores.get(&c.factor),
                "range": config.schema.get(&c.feature).and_then(|s| s.range),
            })
        })
        .collect();
    Value::Array(list).to_string()
}

/// Every schema feature with its kind and range hint.
pub fn schema() -> String {
    serde_json::to_string(&AppConfig::default().schema.features).expect("schema serializes")
}

pub fn scenarios() -> String {
    let list: Vec<Value> = builtin_scenarios()
        .iter()
        .map(|s| json!({ "name": s.name, "days": s.days, "start_date": s.start_date }))
        .collect();
    Value::Array(list).to_string()
}

/// Scores a day given as feature values and renders its radar.
pub fn score_day(features_json: &str, overlays: &str) -> Result<String, String> {
    let config = AppConfig::default();
    let profile = to_profile(&config, &parse_features(features_json)?, "this day")?;
    let risk = risk_of(&config, &profile)?;
    let overlays = parse_overlays(overlays).map_err(|e| e.to_string())?;
    let mut out = risk_json(&risk);
    out["svg"] = Value::from(radar(&config, &risk, "this day", &overlays)?);
    Ok(out.to_string())
}

/// Global and per-feature similarity of two days under the shipped
/// weights and range hints.
pub fn compare_days(a_json: &str, b_json: &str) -> Result<String, String> {
    let config = AppConfig::default();
    let a = to_profile(&config, &parse_features(a_json)?, "a")?;
    let b = to_profile(&config, &parse_features(b_json)?, "b")?;
    let ranges = CaseBase::new(config.schema.clone()).similarity_ranges();
    let sim = global_similarity(&a, &b, &config.schema, &config.similarity, &ranges).map_err(|e| e.to_string())?;
    let weights: BTreeMap<&str, f64> = config.schema.names().map(|n| (n, config.similarity.weight(n))).collect();
    Ok(json!({
        "score": sim.score,
        "per_feature": sim.per_feature,
        "weights": weights,
        "null_similarity": config.similarity.null_similarity,
    })
    .to_string())
}

/// Simulates a scenario up to day `day` (0-based) and runs the full
/// pipeline on that day.
pub fn simulate_day(scenario: &str, day: u32) -> Result<String, String> {
    let config = AppConfig::default();
    let mut s = find_scenario(scenario, &[]).map_err(|e| e.to_string())?;
    if day >= s.days {
        return Err(format!("day {day} is past the scenario's {} days", s.days));
    }
    s.days = day + 1;
    let sim = simulate(&s).map_err(|e| e.to_string())?;
    let truth = sim.truth.last().ok_or("simulation produced no days")?;
    let result = analyse(&sim.stream, &config, Some(&[truth.date]))
        .map_err(|e| e.to_string())?
        .pop()
        .ok_or("no profile for the simulated day")?;
    let counts: Vec<Value> = AdlKind::ALL
        .iter()
        .map(|k| {
            json!({
                "kind": k.as_str(),
                "segmented": result.episodes.iter().filter(|e| e.kind == *k).count(),
                "simulated": (*k != AdlKind::ActiveMovement).then(|| truth.count(*k)),
            })
        })
        .collect();
    let features: BTreeMap<&String, Option<f64>> =
        result.profile.values.iter().map(|(n, v)| (n, v.value())).collect();
    let label = format!("{scenario} {}", truth.date);
    let mut out = risk_json(&result.risk);
    out["date"] = Value::from(truth.date.to_string());
    out["events"] = Value::from(result.stream.len());
    out["episodes"] = Value::Array(counts);
    out["features"] = json!(features);
    out["svg"] = Value::from(radar(&config, &result.risk, &label, &[Overlay::Risky])?);
    Ok(out.to_string())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = factors)]
pub fn factors_js() -> String {
    factors()
}

#[wasm_bindgen(js_name = schema)]
pub fn schema_js() -> String {
    schema()
}

#[wasm_bindgen(js_name = scenarios)]
pub fn scenarios_js() -> String {
    scenarios()
}

#[wasm_bindgen(js_name = scoreDay)]
pub fn score_day_js(features_json: &str, overlays: &str) -> Result<String, JsError> {
    js(score_day(features_json, overlays))
}

#[wasm_bindgen(js_name = compareDays)]
pub fn compare_days_js(a_json: &str, b_json: &str) -> Result<String, JsError> {
    js(compare_days(a_json, b_json))
}

#[wasm_bindgen(js_name = simulateDay)]
pub fn simulate_day_js(scenario: &str, day: u32) -> Result<String, JsError> {
    js(simulate_day(scenario, day))
}
