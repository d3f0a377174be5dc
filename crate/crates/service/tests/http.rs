//! End-to-end endpoint tests driven through the router without a socket.
//!
//! The shared fixture is a three-person index whose band endpoints are set
//! directly ([.85,1.12], [1.18,1.32], [.39,.68]) over a gallery of unit
//! vectors whose distances genuinely fall inside those bands. Probes are the
//! stored mean with one coordinate bumped, which pins the probe's
//! distance-to-mean to the bump within a few ulps.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use emfv_core::synthetic::{unit_cluster_gallery, ClusterSpec};
use emfv_core::{load_snapshot, save_snapshot, save_weights, Band, BandedIndex, Network, PersonId};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use emfv_service::{router, MeanPolicySetting, ServiceConfig, ServiceState};

const TOKEN: &str = "fixture-operator-token";

struct Fixture {
    app: Router,
    snapshot: PathBuf,
    index: BandedIndex,
    _dir: TempDir,
}

fn pid(id: &str) -> PersonId {
    PersonId::new(id).unwrap()
}

fn fixture_config(snapshot: PathBuf) -> ServiceConfig {
    ServiceConfig {
        addr: "127.0.0.1:0".into(),
        snapshot,
        mean_policy: MeanPolicySetting::Frozen,
        margin: 0.0,
        tie_tolerance: 1e-9,
        token: Some(TOKEN.into()),
        weights: None,
    }
}

/// Three persons with hand-set band endpoints over a real unit-vector
/// gallery; index version 1.
fn sample_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let snapshot = dir.path().join("snap.json");
    let specs = [
        ClusterSpec {
            person: pid("p1"),
            low: 0.85,
            high: 1.12,
            samples: 4,
        },
        ClusterSpec {
            person: pid("p2"),
            low: 1.18,
            high: 1.32,
            samples: 4,
        },
        ClusterSpec {
            person: pid("p3"),
            low: 0.39,
            high: 0.68,
            samples: 3,
        },
    ];
    let gallery = unit_cluster_gallery(&specs, 16, 42).unwrap();
    let built = BandedIndex::build_with(&gallery, 0.0, 1e-9).unwrap();
    let bands = vec![
        Band::new(pid("p1"), 0.85, 1.12).unwrap(),
        Band::new(pid("p2"), 1.18, 1.32).unwrap(),
        Band::new(pid("p3"), 0.39, 0.68).unwrap(),
    ];
    let index = BandedIndex::from_parts(built.mean().clone(), bands, 1, 0.0, 1e-9).unwrap();
    save_snapshot(&index, &gallery, &snapshot).unwrap();
    let config = fixture_config(snapshot.clone());
    let app = router(Arc::new(ServiceState::initialize(config).unwrap()));
    Fixture {
        app,
        snapshot,
        index,
        _dir: dir,
    }
}

/// Mean vector with coordinate 0 bumped by `offset`: distance-to-mean equals
/// `offset` to within a few ulps of the bumped coordinate.
fn probe_at(index: &BandedIndex, offset: f64) -> Vec<f64> {
    let mut v = index.mean().values().to_vec();
    v[0] += offset;
    v
}

fn post_json(uri: &str, token: Option<&str>, body: Value) -> Request<Body> {
    let mut builder = Request::builder()
        .method("POST")
        .uri(uri)
        .header("content-type", "application/json");
    if let Some(t) = token {
        builder = builder.header("authorization", format!("Bearer {t}"));
    }
    builder.body(Body::from(body.to_string())).unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::builder().uri(uri).body(Body::empty()).unwrap()
}

async fn call(app: &Router, request: Request<Body>) -> (StatusCode, Vec<u8>) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn call_json(app: &Router, request: Request<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, request).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn health_reports_restored_index() {
    let fx = sample_fixture();
    let (status, body) = call_json(&fx.app, get("/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["index_version"], 1);
    assert_eq!(body["persons"], 3);
    assert_eq!(body["dimension"], 16);
    assert_eq!(body["feature_network"], false);
}

#[tokio::test]
async fn authenticate_accepts_inside_claimed_band() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/authenticate",
        None,
        json!({"person_id": "p1", "probe": {"vector": probe_at(&fx.index, 0.90)}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["decision"], "accept");
    let d = body["distance"].as_f64().unwrap();
    assert!((d - 0.90).abs() < 1e-9, "distance {d}");
    assert_eq!(body["index_version"], 1);
}

#[tokio::test]
async fn authenticate_rejects_distance_in_another_band() {
    let fx = sample_fixture();
    // 1.25 lies in person 2's band; claiming person 1 must reject, not
    // re-identify.
    let req = post_json(
        "/v1/authenticate",
        None,
        json!({"person_id": "p1", "probe": {"vector": probe_at(&fx.index, 1.25)}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["decision"], "reject");
}

#[tokio::test]
async fn authenticate_unknown_person_is_404() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/authenticate",
        None,
        json!({"person_id": "nobody", "probe": {"vector": probe_at(&fx.index, 0.5)}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_person");
    assert!(body["message"].is_string());
}

#[tokio::test]
async fn identify_ranks_band_owner_first() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/identify",
        None,
        json!({"probe": {"vector": probe_at(&fx.index, 0.95)}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["outcome"], "in_band");
    assert_eq!(body["matches"][0]["person"], "p1");
    assert_eq!(body["matches"][0]["interval_distance"], 0.0);
    assert_eq!(body["index_version"], 1);
    assert!(body.get("tie").is_none());
}

#[tokio::test]
async fn identify_surfaces_midpoint_tie() {
    let fx = sample_fixture();
    // 1.15 is equidistant from p1's high end (1.12) and p2's low end (1.18).
    let req = post_json(
        "/v1/identify",
        None,
        json!({"probe": {"vector": probe_at(&fx.index, 1.15)}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["outcome"], "ambiguous_tie");
    assert_eq!(body["tie"], json!(["p1", "p2"]));
    assert_eq!(body["matches"][0]["person"], "p1");
    assert_eq!(body["matches"][1]["person"], "p2");
}

#[tokio::test]
async fn identify_truncates_to_max_neighbors() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/identify",
        None,
        json!({"probe": {"vector": probe_at(&fx.index, 0.95)}, "max_neighbors": 2}),
    );
    let (_, body) = call_json(&fx.app, req).await;
    assert_eq!(body["matches"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn identify_on_empty_index_returns_no_matches() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path().join("never-written.json"));
    let app = router(Arc::new(ServiceState::initialize(config).unwrap()));
    let req = post_json(
        "/v1/identify",
        None,
        json!({"probe": {"vector": [0.1, 0.2, 0.3]}}),
    );
    let (status, body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["matches"], json!([]));
    assert_eq!(body["outcome"], "empty_index");
    assert_eq!(body["index_version"], 0);

    // Authentication against an empty service is an unknown person.
    let req = post_json(
        "/v1/authenticate",
        None,
        json!({"person_id": "p1", "probe": {"vector": [0.1]}}),
    );
    let (status, body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_person");
}

#[tokio::test]
async fn enroll_into_gap_returns_band_and_persists_before_ack() {
    let fx = sample_fixture();
    let samples: Vec<Vec<f64>> = [1.5, 1.55, 1.6]
        .iter()
        .map(|&d| probe_at(&fx.index, d))
        .collect();
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p4", "samples": samples.iter().map(|v| json!({"vector": v})).collect::<Vec<_>>()}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], 2);
    let low = body["band"][0].as_f64().unwrap();
    let high = body["band"][1].as_f64().unwrap();
    assert!((low - 1.5).abs() < 1e-9 && (high - 1.6).abs() < 1e-9);

    // The acknowledged band is already on disk, bit-identical.
    let restored = load_snapshot(&fx.snapshot).unwrap();
    assert_eq!(restored.index.version(), 2);
    let band = restored.index.band_of(&pid("p4")).unwrap();
    assert_eq!(band.low(), low);
    assert_eq!(band.high(), high);
    assert_eq!(restored.gallery.samples(&pid("p4")).unwrap().len(), 3);

    let (_, persons) = call_json(&fx.app, get("/v1/persons")).await;
    assert_eq!(persons["index_version"], 2);
    assert_eq!(persons["persons"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn enroll_requires_bearer_token() {
    let fx = sample_fixture();
    let body = json!({"person_id": "p9", "samples": [{"vector": probe_at(&fx.index, 2.0)}]});
    for token in [None, Some("wrong-token")] {
        let (status, response) =
            call_json(&fx.app, post_json("/v1/enroll", token, body.clone())).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED);
        assert_eq!(response["code"], "unauthorized");
    }
    // Nothing was admitted.
    let (_, health) = call_json(&fx.app, get("/v1/health")).await;
    assert_eq!(health["index_version"], 1);
    assert_eq!(health["persons"], 3);
}

#[tokio::test]
async fn enroll_duplicate_person_conflicts() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p1", "samples": [{"vector": probe_at(&fx.index, 2.0)}]}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "duplicate_person");
    let (_, health) = call_json(&fx.app, get("/v1/health")).await;
    assert_eq!(health["index_version"], 1);
}

#[tokio::test]
async fn enroll_band_collision_conflicts_and_leaves_state_unchanged() {
    let fx = sample_fixture();
    // Distances 1.0 and 1.05 fall inside p1's band.
    let samples = [probe_at(&fx.index, 1.0), probe_at(&fx.index, 1.05)];
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p5", "samples": samples.iter().map(|v| json!({"vector": v})).collect::<Vec<_>>()}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "band_collision");

    // Served state and the on-disk snapshot both still at version 1.
    let (_, health) = call_json(&fx.app, get("/v1/health")).await;
    assert_eq!(health["index_version"], 1);
    let on_disk = load_snapshot(&fx.snapshot).unwrap();
    assert_eq!(on_disk.index.version(), 1);
    assert_eq!(on_disk.index.person_count(), 3);
}

#[tokio::test]
async fn enroll_dimension_mismatch_is_400() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p6", "samples": [{"vector": [0.1, 0.2, 0.3, 0.4]}]}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "dimension_mismatch");
}

#[tokio::test]
async fn enroll_with_no_samples_is_400() {
    let fx = sample_fixture();
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p7", "samples": []}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed_request");
}

#[tokio::test]
async fn malformed_bodies_are_400_without_echo() {
    let fx = sample_fixture();
    let marker = "66442211";
    let raw = Request::builder()
        .method("POST")
        .uri("/v1/identify")
        .header("content-type", "application/json")
        .body(Body::from(format!("{{\"probe\": 0.{marker} oops")))
        .unwrap();
    let (status, bytes) = call(&fx.app, raw).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let text = String::from_utf8(bytes).unwrap();
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["code"], "malformed_request");
    assert!(!text.contains(marker), "response echoed the body: {text}");

    // Structurally valid JSON with a payload that fits no variant.
    let req = post_json(
        "/v1/identify",
        None,
        json!({"probe": {"vector": [0.1], "image": "AAAA"}}),
    );
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed_request");

    let req = post_json("/v1/identify", None, json!({"probe": {}}));
    let (status, _) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "", "samples": [{"vector": [0.1]}]}),
    );
    let (status, _) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_endpoints_are_404() {
    let fx = sample_fixture();
    let (status, body) = call_json(&fx.app, get("/v1/nope")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn image_probe_without_network_is_501() {
    let fx = sample_fixture();
    let pixels = vec![0.5; 256];
    let pgm = emfv_core::pgm::encode_pgm(&pixels, 16, 16).unwrap();
    let encoded = base64_encode(&pgm);
    let req = post_json("/v1/identify", None, json!({"probe": {"image": encoded}}));
    let (status, body) = call_json(&fx.app, req).await;
    assert_eq!(status, StatusCode::NOT_IMPLEMENTED);
    assert_eq!(body["code"], "feature_network_unavailable");
}

fn base64_encode(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn checkerboard_image(size: usize, phase: usize, bright: f64) -> String {
    let mut pixels = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            if (x + y + phase) % 2 == 0 {
                pixels[y * size + x] = bright;
            } else {
                pixels[y * size + x] = 0.1;
            }
        }
    }
    base64_encode(&emfv_core::pgm::encode_pgm(&pixels, size, size).unwrap())
}

#[tokio::test]
async fn image_payloads_flow_through_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("net.weights");
    save_weights(&Network::desk_default(7), &weights).unwrap();
    let mut config = fixture_config(dir.path().join("img-snap.json"));
    config.margin = 0.05;
    config.weights = Some(weights);
    let app = router(Arc::new(ServiceState::initialize(config).unwrap()));

    let image_a = checkerboard_image(16, 0, 0.9);
    let image_b = checkerboard_image(16, 1, 0.8);
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "img-person", "samples": [{"image": image_a}, {"image": image_b}]}),
    );
    let (status, enroll_body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::OK, "{enroll_body}");
    assert_eq!(enroll_body["version"], 1);

    let req = post_json("/v1/identify", None, json!({"probe": {"image": image_a}}));
    let (status, bytes) = call(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(bytes).unwrap();
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["outcome"], "in_band");
    assert_eq!(body["matches"][0]["person"], "img-person");

    let req = post_json(
        "/v1/authenticate",
        None,
        json!({"person_id": "img-person", "probe": {"image": image_b}}),
    );
    let (status, auth_body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(auth_body["decision"], "accept");

    // Neither responses nor the snapshot may carry image bytes; the stored
    // representation is the extracted feature vector.
    let image_marker = &image_a[..32];
    assert!(!text.contains(image_marker));
    assert!(!enroll_body.to_string().contains(image_marker));
    let snapshot_text = std::fs::read_to_string(dir.path().join("img-snap.json")).unwrap();
    assert!(!snapshot_text.contains(image_marker));
    assert!(!snapshot_text.contains(&image_b[..32]));
}

#[tokio::test]
async fn identical_identify_requests_return_identical_bytes() {
    let fx = sample_fixture();
    let body = json!({"probe": {"vector": probe_at(&fx.index, 1.05)}});
    let (_, first) = call(&fx.app, post_json("/v1/identify", None, body.clone())).await;
    let (_, second) = call(&fx.app, post_json("/v1/identify", None, body)).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn failed_persist_leaves_served_state_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    // Parent directory of the snapshot does not exist, so persisting fails.
    let config = fixture_config(dir.path().join("missing-subdir").join("snap.json"));
    let app = router(Arc::new(ServiceState::initialize(config).unwrap()));
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p1", "samples": [{"vector": [0.5, 0.5]}]}),
    );
    let (status, body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["code"], "io_error");

    // The failed enrollment is not served.
    let (_, health) = call_json(&app, get("/v1/health")).await;
    assert_eq!(health["index_version"], 0);
    assert_eq!(health["persons"], 0);
    let (_, identify) = call_json(
        &app,
        post_json(
            "/v1/identify",
            None,
            json!({"probe": {"vector": [0.5, 0.5]}}),
        ),
    )
    .await;
    assert_eq!(identify["outcome"], "empty_index");
}

#[tokio::test]
async fn persons_lists_ids_and_band_endpoints_only() {
    let fx = sample_fixture();
    let (status, bytes) = call(&fx.app, get("/v1/persons")).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(bytes).unwrap();
    let body: Value = serde_json::from_str(&text).unwrap();
    let persons = body["persons"].as_array().unwrap();
    assert_eq!(persons.len(), 3);
    for person in persons {
        let keys: Vec<&str> = person
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        assert_eq!(keys, ["band", "id"]);
    }
    assert!(!text.contains("samples"));
    assert!(!text.contains("vector"));
}

/// Collects everything the subscriber writes so tests can grep it.
#[derive(Clone)]
struct CaptureWriter(Arc<Mutex<Vec<u8>>>);

impl std::io::Write for CaptureWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl<'a> tracing_subscriber::fmt::MakeWriter<'a> for CaptureWriter {
    type Writer = CaptureWriter;
    fn make_writer(&'a self) -> Self::Writer {
        self.clone()
    }
}

#[tokio::test]
async fn probe_content_never_reaches_logs_responses_or_snapshot() {
    let sink = Arc::new(Mutex::new(Vec::new()));
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .with_writer(CaptureWriter(sink.clone()))
        .finish();
    let _guard = tracing::subscriber::set_default(subscriber);

    let fx = sample_fixture();
    let mut responses = String::new();

    // Probe with distinctive coordinate values.
    let mut probe = fx.index.mean().values().to_vec();
    probe[1] = 0.57313371;
    probe[2] = 0.91226449;
    let probe_markers = ["0.57313371", "0.91226449"];

    let (status, bytes) = call(
        &fx.app,
        post_json("/v1/identify", None, json!({"probe": {"vector": probe}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    responses.push_str(&String::from_utf8(bytes).unwrap());

    let mut auth_probe = fx.index.mean().values().to_vec();
    auth_probe[1] = 0.57313371;
    let (_, bytes) = call(
        &fx.app,
        post_json(
            "/v1/authenticate",
            None,
            json!({"person_id": "p2", "probe": {"vector": auth_probe}}),
        ),
    )
    .await;
    responses.push_str(&String::from_utf8(bytes).unwrap());

    // Successful enrollment: its samples legitimately land in the snapshot,
    // but never in a response or a log line.
    let mut enroll_sample = fx.index.mean().values().to_vec();
    enroll_sample[3] += 1.83115599;
    let enroll_marker = format!("{:?}", enroll_sample[3]);
    let (status, bytes) = call(
        &fx.app,
        post_json(
            "/v1/enroll",
            Some(TOKEN),
            json!({"person_id": "pm", "samples": [{"vector": enroll_sample}]}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    responses.push_str(&String::from_utf8(bytes).unwrap());

    // Failed enrollment (collision) must not echo the sample either.
    let mut colliding = fx.index.mean().values().to_vec();
    colliding[4] += 1.0;
    let colliding_marker = format!("{:?}", colliding[4]);
    let (status, bytes) = call(
        &fx.app,
        post_json(
            "/v1/enroll",
            Some(TOKEN),
            json!({"person_id": "pc", "samples": [{"vector": colliding}]}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    responses.push_str(&String::from_utf8(bytes).unwrap());

    let logs = String::from_utf8(sink.lock().unwrap().clone()).unwrap();
    assert!(!logs.is_empty(), "expected captured log output");
    let snapshot_text = std::fs::read_to_string(&fx.snapshot).unwrap();

    for marker in probe_markers {
        assert!(
            !responses.contains(marker),
            "response leaked probe: {marker}"
        );
        assert!(!logs.contains(marker), "log leaked probe: {marker}");
        assert!(
            !snapshot_text.contains(marker),
            "snapshot leaked probe: {marker}"
        );
    }
    assert!(
        !responses.contains(&enroll_marker),
        "response leaked sample"
    );
    assert!(!logs.contains(&enroll_marker), "log leaked sample");
    assert!(
        !responses.contains(&colliding_marker),
        "response leaked rejected sample"
    );
    assert!(
        !logs.contains(&colliding_marker),
        "log leaked rejected sample"
    );
}

#[tokio::test]
async fn recompute_policy_rebuilds_all_bands_on_enroll() {
    let fx = sample_fixture();
    let mut config = fixture_config(fx.snapshot.clone());
    config.mean_policy = MeanPolicySetting::Recompute;
    let app = router(Arc::new(ServiceState::initialize(config).unwrap()));

    // Samples equal to the current mean leave the recomputed mean in place,
    // so the rebuilt bands shrink to the actual per-person distance ranges
    // and the new person sits near distance zero, far from every band.
    let center = fx.index.mean().values().to_vec();
    let req = post_json(
        "/v1/enroll",
        Some(TOKEN),
        json!({"person_id": "p4", "samples": [{"vector": center.clone()}, {"vector": center}]}),
    );
    let (status, body) = call_json(&app, req).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], 2);
    assert!(body["band"][1].as_f64().unwrap() < 0.1);

    // Every band was re-derived from sample distances; the authored
    // endpoints are gone.
    let restored = load_snapshot(&fx.snapshot).unwrap();
    let p1 = restored.index.band_of(&pid("p1")).unwrap();
    assert!(p1.low() != 0.85 || p1.high() != 1.12);
    assert!(p1.low() > 0.85 && p1.high() < 1.12);
}
