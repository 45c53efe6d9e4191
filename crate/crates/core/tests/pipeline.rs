use std::fs;

use adlsense_core::cbr::{save_casebase, CaseBase};
use adlsense_core::event::EventStream;
use adlsense_core::pipeline::{
    analyse, build_snapshot, parse_profiles, profiles_to_jsonl, simulate_profiles, EventSource, PipelineError,
    SnapshotInputs,
};
use adlsense_core::sim::{find_scenario, simulate};
use adlsense_core::AppConfig;

#[test]
fn empty_stream_gives_no_days() {
    let config = AppConfig::default();
    assert!(analyse(&EventStream::new("r", vec![]), &config, None).unwrap().is_empty());
}

#[test]
fn profiles_round_trip_through_jsonl() {
    let config = AppConfig::default();
    let profiles = simulate_profiles("steady_healthy", &config).unwrap();
    let text = profiles_to_jsonl(&profiles);
    assert_eq!(parse_profiles(&text, &config).unwrap(), profiles);
    let (line, _) = parse_profiles(&format!("{text}{{\"resident\":1}}\n"), &config).unwrap_err();
    assert_eq!(line, profiles.len() + 1);
}

#[test]
fn event_sources_name_residents() {
    let a: EventSource = "alice=/data/x.jsonl".parse().unwrap();
    assert_eq!((a.resident.as_str(), a.path.to_str().unwrap()), ("alice", "/data/x.jsonl"));
    let b: EventSource = "/data/bob.jsonl".parse().unwrap();
    assert_eq!(b.resident, "bob");
}

#[test]
fn snapshot_from_event_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = AppConfig::default();
    let mut scenario = find_scenario("poor_sleep_frequent_toilet", &[]).unwrap();
    scenario.days = 5;
    let path = dir.path().join("r1.jsonl");
    fs::write(&path, simulate(&scenario).unwrap().stream.to_jsonl()).unwrap();

    let inputs = SnapshotInputs { events: vec![path.to_str().unwrap().parse().unwrap()], ..Default::default() };
    let snap = build_snapshot(&config, &inputs).unwrap();
    assert_eq!(snap.residents.len(), 1);
    assert_eq!(snap.residents["r1"].profiles.len(), 5);
    assert_eq!(snap.casebase.len(), 90);

    let again = build_snapshot(&config, &inputs).unwrap();
    assert_eq!(snap.fingerprint, again.fingerprint);

    let base_path = dir.path().join("base.json");
    save_casebase(&CaseBase::new(config.schema.clone()), &base_path).unwrap();
    let small = build_snapshot(&config, &SnapshotInputs { casebase: Some(base_path), ..inputs.clone() }).unwrap();
    assert!(small.casebase.is_empty());
    assert_ne!(small.fingerprint, snap.fingerprint);
}

#[test]
fn foreign_case_base_schema_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = AppConfig::default();
    let mut schema = config.schema.clone();
    schema.features.pop();
    let path = dir.path().join("base.json");
    save_casebase(&CaseBase::new(schema), &path).unwrap();
    let err = build_snapshot(&config, &SnapshotInputs { casebase: Some(path), ..Default::default() }).unwrap_err();
    assert!(matches!(err, PipelineError::Cbr(_)), "{err}");
}

#[test]
fn missing_event_file_names_the_path() {
    let config = AppConfig::default();
    let inputs = SnapshotInputs { events: vec!["/nonexistent/r9.jsonl".parse().unwrap()], ..Default::default() };
    let err = build_snapshot(&config, &inputs).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/r9.jsonl"), "{err}");
}
