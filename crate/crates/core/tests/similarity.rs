use std::collections::BTreeMap;

use adlsense_core::cbr::{global_similarity, retrieve, self_trend, Case, CaseBase, Label, SimilarityConfig};
use adlsense_core::profile::{DailyProfile, FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, MissingReason};
use chrono::NaiveDate;
use proptest::prelude::*;

const NUMERIC: [&str; 3] = ["f0", "f1", "f2"];

fn schema() -> FeatureSchema {
    let mut features: Vec<FeatureSpec> = NUMERIC
        .iter()
        .map(|n| FeatureSpec { name: n.to_string(), kind: FeatureKind::Numeric, range: None })
        .collect();
    features.push(FeatureSpec { name: "flag".into(), kind: FeatureKind::Binary, range: None });
    FeatureSchema { features }
}

fn config(weights: [f64; 4], null_similarity: f64) -> SimilarityConfig {
    SimilarityConfig {
        weights: NUMERIC.iter().map(|n| n.to_string()).chain(["flag".to_string()]).zip(weights).collect(),
        null_similarity,
        k: 5,
        trend_window: 3,
        trend_threshold: 0.7,
    }
}

type Row = ([Option<f64>; 3], bool);

fn profile(id: &str, day: u32, row: &Row) -> DailyProfile {
    let mut values: BTreeMap<String, FeatureValue> = NUMERIC
        .iter()
        .zip(row.0)
        .map(|(n, v)| (n.to_string(), v.map_or(FeatureValue::Missing(MissingReason::NoEpisodes), FeatureValue::Value)))
        .collect();
    values.insert("flag".into(), FeatureValue::Value(f64::from(u8::from(row.1))));
    DailyProfile {
        resident_id: id.into(),
        date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Days::new(u64::from(day)),
        values,
        provenance: BTreeMap::new(),
    }
}

fn row() -> impl Strategy<Value = Row> {
    (prop::array::uniform3(prop::option::weighted(0.9, -50.0f64..50.0)), any::<bool>())
}

/// Observed range per numeric feature, widened to one unit when flat.
fn oracle_ranges(rows: &[Row]) -> [(f64, f64); 3] {
    std::array::from_fn(|j| {
        let xs: Vec<f64> = rows.iter().filter_map(|r| r.0[j]).collect();
        if xs.is_empty() {
            return (0.0, 1.0);
        }
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo, lo + 1.0) }
    })
}

fn oracle_similarity(a: &Row, b: &Row, ranges: &[(f64, f64); 3], w: [f64; 4], null: f64) -> f64 {
    let mut num = 0.0;
    for j in 0..3 {
        let s = match (a.0[j], b.0[j]) {
            (Some(x), Some(y)) => (1.0 - (x - y).abs() / (ranges[j].1 - ranges[j].0)).max(0.0),
            _ => null,
        };
        num += w[j] * s;
    }
    num += w[3] * if a.1 == b.1 { 1.0 } else { 0.0 };
    num / w.iter().sum::<f64>()
}

fn base(rows: &[Row]) -> CaseBase {
    let mut base = CaseBase::new(schema());
    for (i, r) in rows.iter().enumerate() {
        base.insert(Case {
            case_id: format!("c{i:04}"),
            profile: profile(&format!("r{}", i % 7), i as u32, r),
            context: BTreeMap::new(),
            label: if r.1 { Label::Risky } else { Label::NotRisky },
            label_source: "test".into(),
        })
        .unwrap();
    }
    base
}

fn weights() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.0f64..3.0).prop_filter("positive total", |w| w.iter().sum::<f64>() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retrieval_matches_exhaustive_scan(
        rows in prop::collection::vec(row(), 1..120),
        query in row(),
        w in weights(),
        null in 0.0f64..=1.0,
        k in 1usize..12,
    ) {
        let base = base(&rows);
        let cfg = config(w, null);
        let ranges = oracle_ranges(&rows);
        let q = profile("query", 0, &query);
        let got = retrieve(&q, &base, &cfg, k, None).unwrap();

        let mut want: Vec<(f64, String)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (oracle_similarity(&query, r, &ranges, w, null), format!("c{i:04}")))
            .collect();
        want.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        want.truncate(k);

        prop_assert_eq!(got.neighbours.len(), want.len());
        for (n, (s, id)) in got.neighbours.iter().zip(&want) {
            prop_assert!((n.similarity - s).abs() <= 1e-9, "{} vs {}", n.similarity, s);
        }
        // Ordering compared exactly once scores are known to agree.
        let mut by_lib: Vec<(f64, &str)> = got.neighbours.iter().map(|n| (n.similarity, n.case_id.as_str())).collect();
        by_lib.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        prop_assert_eq!(
            by_lib.iter().map(|x| x.1).collect::<Vec<_>>(),
            got.neighbours.iter().map(|n| n.case_id.as_str()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn similarity_is_reflexive_symmetric_bounded(
        rows in prop::collection::vec(row(), 2..30),
        w in weights(),
    ) {
        let base = base(&rows);
        let cfg = config(w, 0.5);
        let ranges = base.similarity_ranges();
        let s = schema();
        let p = profile("a", 0, &rows[0]);
        let q = profile("b", 0, &rows[1]);
        let pq = global_similarity(&p, &q, &s, &cfg, &ranges).unwrap().score;
        let qp = global_similarity(&q, &p, &s, &cfg, &ranges).unwrap().score;
        prop_assert_eq!(pq, qp);
        prop_assert!((0.0..=1.0).contains(&pq));
        let full = (rows[0].0.iter().all(Option::is_some), global_similarity(&p, &p, &s, &cfg, &ranges).unwrap().score);
        if full.0 {
            prop_assert!((full.1 - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rescaling_weights_changes_nothing(
        rows in prop::collection::vec(row(), 2..30),
        w in weights(),
        c in 0.1f64..10.0,
    ) {
        let base = base(&rows);
        let p = profile("a", 0, &rows[0]);
        let a = retrieve(&p, &base, &config(w, 0.5), 5, None).unwrap();
        let b = retrieve(&p, &base, &config(w.map(|x| x * c), 0.5), 5, None).unwrap();
        for (x, y) in a.neighbours.iter().zip(&b.neighbours) {
            prop_assert!((x.similarity - y.similarity).abs() <= 1e-12);
        }
    }
}

#[test]
fn excluding_a_resident_drops_only_their_cases() {
    let rows: Vec<Row> = (0..20).map(|i| ([Some(i as f64), Some(1.0), None], i % 2 == 0)).collect();
    let base = base(&rows);
    let q = profile("x", 0, &rows[3]);
    let all = retrieve(&q, &base, &config([1.0; 4], 0.5), 20, None).unwrap();
    let some = retrieve(&q, &base, &config([1.0; 4], 0.5), 20, Some("r3")).unwrap();
    assert_eq!(all.neighbours.len(), 20);
    assert!(some.neighbours.iter().all(|n| n.resident != "r3"));
    assert_eq!(some.neighbours.len(), 20 - all.neighbours.iter().filter(|n| n.resident == "r3").count());
}

#[test]
fn constant_history_has_unit_self_similarity() {
    let row: Row = ([Some(3.0), Some(4.0), Some(5.0)], true);
    let history: Vec<DailyProfile> = (0..8).map(|d| profile("r", d, &row)).collect();
    let base = CaseBase::new(schema());
    let trend = self_trend(&history, 3, &schema(), &config([1.0; 4], 0.5), &base.similarity_ranges()).unwrap();
    assert_eq!(trend.len(), 5);
    assert!(trend.iter().all(|p| p.self_similarity == 1.0 && !p.flag));
}

#[test]
fn case_base_survives_json() {
    let rows: Vec<Row> = (0..5).map(|i| ([Some(i as f64), None, Some(2.0)], i == 1)).collect();
    let b = base(&rows);
    assert_eq!(CaseBase::from_json(&b.to_json()).unwrap(), b);
}
