use std::sync::{Arc, OnceLock};

use adlsense_core::pipeline::{build_snapshot, SnapshotInputs};
use adlsense_core::report::Snapshot;
use adlsense_core::AppConfig;
use adlsense_service::{router, ServiceError, ServiceState, FINGERPRINT_HEADER};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn demo() -> Snapshot {
    static SNAP: OnceLock<Snapshot> = OnceLock::new();
    SNAP.get_or_init(|| {
        build_snapshot(&AppConfig::default(), &SnapshotInputs { demo: true, ..Default::default() }).unwrap()
    })
    .clone()
}

struct Reply {
    status: StatusCode,
    content_type: String,
    fingerprint: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn get(state: &ServiceState, uri: &str) -> Reply {
    let response = router(state.clone(), true)
        .oneshot(Request::get(uri).header("origin", "http://localhost:5173").body(Body::empty()).unwrap())
        .await
        .unwrap();
    let header = |name: &str| response.headers().get(name).map(|v| v.to_str().unwrap().to_string());
    let content_type = header("content-type").unwrap_or_default();
    let fingerprint = header(FINGERPRINT_HEADER);
    let status = response.status();
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, fingerprint, body }
}

fn loaded() -> ServiceState {
    ServiceState::new(Some(demo()), None)
}

#[tokio::test]
async fn residents_are_listed_in_order() {
    let state = loaded();
    let r = get(&state, "/api/residents").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.fingerprint.as_deref(), Some(demo().fingerprint.as_str()));
    let list = r.json();
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|v| v["resident_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["gradual_decline", "poor_sleep_frequent_toilet", "steady_healthy"]);
    assert_eq!(list[0]["days_available"], 30);
    assert_eq!(list[0]["last_date"], "2023-01-30");
}

#[tokio::test]
async fn no_snapshot_is_503() {
    let r = get(&ServiceState::default(), "/api/residents").await;
    assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(r.json()["error"], "no_snapshot");
    assert!(r.json()["detail"].is_string());
}

#[tokio::test]
async fn flagged_day_explains_sleep_and_toilet() {
    let r = get(&loaded(), "/api/residents/poor_sleep_frequent_toilet/risk?date=2023-01-10").await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    let flags: Vec<&str> = v["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"Sleep") && flags.contains(&"Toilet"), "{flags:?}");
    assert_eq!(v["sources"]["Sleep"]["feature"], "sleep_duration");
    assert!(v["template"]["provenance"].is_string());
}

#[tokio::test]
async fn lookup_errors() {
    let state = loaded();
    let cases = [
        ("/api/residents/nobody/risk", StatusCode::NOT_FOUND, "unknown_resident"),
        ("/api/residents/steady_healthy/risk?date=2022-12-01", StatusCode::NOT_FOUND, "no_profile"),
        ("/api/residents/steady_healthy/risk?date=yesterday", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/residents/steady_healthy/similar?k=0", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/residents/steady_healthy/similar?k=two", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/residents/steady_healthy/trend?factor=Gait", StatusCode::NOT_FOUND, "unknown_factor"),
        ("/api/residents/steady_healthy/trend", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/residents/steady_healthy/radar.svg?overlay=bogus", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/residents/steady_healthy/self-similarity?window=0", StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter"),
        ("/api/nothing", StatusCode::NOT_FOUND, "not_found"),
    ];
    for (uri, status, code) in cases {
        let r = get(&state, uri).await;
        assert_eq!(r.status, status, "{uri}");
        assert_eq!(r.json()["error"], code, "{uri}");
        assert!(r.content_type.starts_with("application/json"), "{uri}");
    }
}

#[tokio::test]
async fn stored_day_is_its_own_nearest_neighbour() {
    let r = get(&loaded(), "/api/residents/steady_healthy/similar?date=2023-01-07&k=1").await;
    let v = r.json();
    assert_eq!(v["neighbours"][0]["case_id"], "steady_healthy:2023-01-07");
    assert_eq!(v["neighbours"][0]["similarity"], 1.0);
    assert!(v["neighbours"][0]["per_feature"].as_object().unwrap().values().all(|s| s == 1.0));
    assert!(v["recommendation"].is_string());
    assert!(v["vote_score"].is_number());

    let r = get(&loaded(), "/api/residents/steady_healthy/similar?date=2023-01-07&k=3&exclude_self=true").await;
    assert!(r.json()["neighbours"].as_array().unwrap().iter().all(|n| n["resident"] != "steady_healthy"));
}

#[tokio::test]
async fn decline_self_similarity_falls() {
    let v = get(&loaded(), "/api/residents/gradual_decline/self-similarity").await.json();
    let points = v["points"].as_array().unwrap();
    assert_eq!(v["window"], 14);
    let first = points.first().unwrap()["self_similarity"].as_f64().unwrap();
    let last = points.last().unwrap()["self_similarity"].as_f64().unwrap();
    assert!(last < first, "{first} -> {last}");
    let dates: Vec<&str> = points.iter().map(|p| p["date"].as_str().unwrap()).collect();
    assert!(dates.windows(2).all(|w| w[0] < w[1]));
}

#[tokio::test]
async fn trend_series_is_sorted() {
    let v = get(&loaded(), "/api/residents/gradual_decline/trend?factor=Toilet").await.json();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 30);
    assert_eq!(v["template_level"], 0.6);
    let r = get(&loaded(), "/api/residents/gradual_decline/trend.svg?factor=SleepDisturbances").await;
    assert_eq!(r.content_type, "image/svg+xml");
    series_count(&r.body);
}

fn series_count(body: &[u8]) -> usize {
    let text = std::str::from_utf8(body).unwrap();
    assert!(text.starts_with("<svg"));
    text.matches(r#"class="series""#).count()
}

#[tokio::test]
async fn radar_overlays_control_polygons() {
    let state = loaded();
    let base = "/api/residents/poor_sleep_frequent_toilet/radar.svg?date=2023-01-20";
    let one = get(&state, base).await;
    assert_eq!(one.status, StatusCode::OK);
    assert_eq!(one.content_type, "image/svg+xml");
    assert_eq!(series_count(&one.body), 1);
    assert_eq!(series_count(&get(&state, &format!("{base}&overlay=risky")).await.body), 2);
    assert_eq!(series_count(&get(&state, &format!("{base}&overlay=risky,history")).await.body), 3);
}

#[tokio::test]
async fn identical_requests_give_identical_bodies() {
    let state = loaded();
    for uri in [
        "/api/residents/gradual_decline/similar?k=5",
        "/api/residents/gradual_decline/profile",
        "/api/residents/gradual_decline/radar.svg?overlay=history",
    ] {
        assert_eq!(get(&state, uri).await.body, get(&state, uri).await.body, "{uri}");
    }
}

#[tokio::test]
async fn cors_can_be_switched_off() {
    let state = loaded();
    let req = || Request::get("/api/residents").header("origin", "http://example.org").body(Body::empty()).unwrap();
    let on = router(state.clone(), true).oneshot(req()).await.unwrap();
    assert_eq!(on.headers()["access-control-allow-origin"], "*");
    let off = router(state, false).oneshot(req()).await.unwrap();
    assert!(off.headers().get("access-control-allow-origin").is_none());
}

#[tokio::test]
async fn reload_swaps_snapshot_and_keeps_old_on_failure() {
    let config = AppConfig::default();
    let small = Snapshot::build(config.clone(), demo().residents["steady_healthy"].profiles.clone(), demo().casebase.clone()).unwrap();
    let bigger = demo();
    let toggle = Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let t = toggle.clone();
    let loader: adlsense_service::Loader = Arc::new(move || match t.fetch_add(1, std::sync::atomic::Ordering::SeqCst) {
        0 => Ok(bigger.clone()),
        _ => Err("disk on fire".into()),
    });
    let state = ServiceState::new(Some(small.clone()), Some(loader));
    let before = get(&state, "/api/residents").await;
    assert_eq!(before.json().as_array().unwrap().len(), 1);

    let held = state.current().unwrap();
    let fingerprint = state.reload().unwrap();
    let after = get(&state, "/api/residents").await;
    assert_eq!(after.json().as_array().unwrap().len(), 3);
    assert_eq!(after.fingerprint.as_deref(), Some(fingerprint.as_str()));
    assert_ne!(before.fingerprint, after.fingerprint);
    assert_eq!(held.fingerprint, small.fingerprint);

    assert!(matches!(state.reload(), Err(ServiceError::Reload(_))));
    assert_eq!(get(&state, "/api/residents").await.fingerprint.as_deref(), Some(fingerprint.as_str()));
    assert!(matches!(ServiceState::default().reload(), Err(ServiceError::NoLoader)));
}
