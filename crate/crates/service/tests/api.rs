use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bevscene_service::{router, AppState, META_HEADER, VERSION_HEADER};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn new_session(app: &Router) -> (String, Value) {
    let (status, _, body) =
        call(app, "POST", "/v1/sessions", Some(json!({ "height": 48, "width": 48, "margin_px": 8, "seed": 1 }))).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let v = json_of(&body);
    (v["id"].as_str().unwrap().to_string(), v)
}

#[tokio::test]
async fn session_lifecycle_and_errors() {
    let app = router(AppState::new());
    let (id, v) = new_session(&app).await;
    assert_eq!(v["version"], 0);
    assert_eq!(v["dims"], json!([48, 48, 11]));

    let (status, _, body) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["id"], id.as_str());

    let (status, _, body) = call(&app, "GET", "/v1/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"]["code"], "not_found");

    let (status, _, _) = call(&app, "PUT", "/v1/sessions/nope/edits", Some(json!({ "op": "remove", "id": 0 }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _, _) = call(&app, "PUT", &format!("/v1/sessions/{id}/edits"), Some(json!({ "op": "warp" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) =
        call(&app, "PUT", &format!("/v1/sessions/{id}/edits"), Some(json!({ "op": "remove", "id": 999 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // Rejected edits leave the version alone.
    let (_, _, body) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(json_of(&body)["version"], 0);

    let first = v["objects"][0]["id"].as_u64().unwrap();
    let (status, _, body) = call(
        &app,
        "PUT",
        &format!("/v1/sessions/{id}/edits"),
        Some(json!({ "op": "restyle", "id": first, "color": 2 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert_eq!(json_of(&body)["version"], 1);

    let (status, _, _) = call(&app, "POST", "/v1/sessions", Some(json!({ "height": 8 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn if_match_rejects_stale_writers() {
    let app = router(AppState::new());
    let (id, v) = new_session(&app).await;
    let first = v["objects"][0]["id"].as_u64().unwrap();
    let edit = |color: usize| json!({ "op": "restyle", "id": first, "color": color });
    let put = |version: u64, body: Value| {
        Request::builder()
            .method("PUT")
            .uri(format!("/v1/sessions/{id}/edits"))
            .header("if-match", version.to_string())
            .body(Body::from(body.to_string()))
            .unwrap()
    };
    let resp = app.clone().oneshot(put(0, edit(1))).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let resp = app.clone().oneshot(put(0, edit(2))).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_writers_are_linearizable() {
    let app = router(AppState::new());
    let (id, v) = new_session(&app).await;
    let first = v["objects"][0]["id"].as_u64().unwrap();
    let writers: Vec<_> = (0..2)
        .map(|w| {
            let app = app.clone();
            let id = id.clone();
            tokio::spawn(async move {
                let mut versions = Vec::new();
                for i in 0..20 {
                    let color = (w * 20 + i) % 8;
                    let (status, _, body) = call(
                        &app,
                        "PUT",
                        &format!("/v1/sessions/{id}/edits"),
                        Some(json!({ "op": "restyle", "id": first, "color": color })),
                    )
                    .await;
                    assert_eq!(status, StatusCode::OK);
                    versions.push(json_of(&body)["version"].as_u64().unwrap());
                }
                versions
            })
        })
        .collect();
    let mut all = Vec::new();
    for w in writers {
        let versions = w.await.unwrap();
        assert!(versions.windows(2).all(|p| p[0] < p[1]), "a writer saw versions go backwards");
        all.extend(versions);
    }
    all.sort_unstable();
    assert_eq!(all, (1..=40).collect::<Vec<u64>>(), "every edit got its own version");
    let (_, _, body) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(json_of(&body)["version"], 40);
}

#[tokio::test]
async fn renders_are_reproducible_and_tagged() {
    let app = router(AppState::new());
    let (id, _) = new_session(&app).await;
    let uri = format!("/v1/sessions/{id}/render?w=32&h=24&samples=16&view=front");
    let (status, h1, png1) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h1["content-type"], "image/png");
    assert_eq!(h1[VERSION_HEADER], "0");
    let meta: Value = serde_json::from_str(h1[META_HEADER].to_str().unwrap()).unwrap();
    assert_eq!(meta["width"], 32);
    assert!(meta["high_frequency_energy"].as_f64().unwrap() >= 0.0);
    let (_, _, png2) = call(&app, "GET", &uri, None).await;
    assert_eq!(png1, png2);
    let img = image::load_from_memory(&png1).unwrap();
    assert_eq!((img.width(), img.height()), (32, 24));

    let (status, _, _) = call(&app, "GET", &format!("/v1/sessions/{id}/render?w=0"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = call(&app, "GET", &format!("/v1/sessions/{id}/render?view=sideways"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn camera_updates_bump_the_version() {
    let app = router(AppState::new());
    let (id, v) = new_session(&app).await;
    let mut cam = v["camera"].clone();
    cam["position"][2] = json!(5.0);
    let (status, _, body) = call(&app, "PUT", &format!("/v1/sessions/{id}/camera"), Some(cam.clone())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert_eq!(json_of(&body)["version"], 1);
    cam["near"] = json!(-1.0);
    let (status, _, _) = call(&app, "PUT", &format!("/v1/sessions/{id}/camera"), Some(cam)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stitch_job_completes() {
    let app = router(AppState::new());
    let (status, _, body) =
        call(&app, "POST", "/v1/sessions", Some(json!({ "height": 32, "width": 64, "margin_px": 4, "seed": 2 }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = json_of(&body)["id"].as_str().unwrap().to_string();
    let req = json!({ "n_step": 8, "frame_w": 32, "frame_h": 16, "n_samples": 8 });
    let (status, _, body) = call(&app, "POST", &format!("/v1/sessions/{id}/stitch"), Some(req)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
    let jid = json_of(&body)["id"].as_str().unwrap().to_string();
    let mut job = Value::Null;
    for _ in 0..600 {
        let (_, _, body) = call(&app, "GET", &format!("/v1/jobs/{jid}"), None).await;
        job = json_of(&body);
        if job["state"] == "done" || job["state"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert_eq!(job["state"], "done", "{job}");
    // K = (64 - 32) / 8 + 1 with n_loc = 8 columns per frame.
    assert_eq!(job["report"]["K"], 5);
    assert_eq!(job["progress"]["done"], 5);
    let (status, _, png) = call(&app, "GET", &format!("/v1/jobs/{jid}/panorama"), None).await;
    assert_eq!(status, StatusCode::OK);
    let img = image::load_from_memory(&png).unwrap();
    assert_eq!((img.width(), img.height()), (40, 16));
}

#[tokio::test]
async fn eqt_endpoint_reports_capped_procedural_score() {
    let app = router(AppState::new());
    let (id, _) = new_session(&app).await;
    let (status, _, body) =
        call(&app, "GET", &format!("/v1/sessions/{id}/eqt?shifts=1,3&latents=1&samples=16"), None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let v = json_of(&body);
    assert_eq!(v["fid"], "unavailable");
    assert_eq!(v["report"]["capped"], true);
    let (status, _, _) = call(&app, "GET", &format!("/v1/sessions/{id}/eqt?shifts=40"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[test]
fn snapshot_round_trip_restores_sessions() {
    let state = AppState::new();
    let session = bevscene_service::Session::create(
        serde_json::from_value(json!({ "height": 32, "width": 32, "margin_px": 4, "seed": 5 })).unwrap(),
    )
    .unwrap();
    let id = session.record.id.clone();
    let bev = session.bev.to_bytes().unwrap();
    state.insert_session(session);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.json");
    bevscene_service::save_snapshot(&state, &path).unwrap();
    let restored = AppState::new();
    assert_eq!(bevscene_service::load_snapshot(&restored, &path).unwrap(), 1);
    let s = restored.session(&id).unwrap();
    assert_eq!(s.lock().unwrap().bev.to_bytes().unwrap(), bev);
}

#[tokio::test]
async fn insert_then_remove_restores_the_map() {
    let app = router(AppState::new());
    let (id, _) = new_session(&app).await;
    let (_, _, before) = call(&app, "GET", &format!("/v1/sessions/{id}/bev"), None).await;
    let object = json!({ "id": 50, "shape": "cube", "color": 4, "center": [6.125, 6.125], "footprint_radius": 0.5, "height": 1.0 });
    let (status, _, body) =
        call(&app, "PUT", &format!("/v1/sessions/{id}/edits"), Some(json!({ "op": "insert", "object": object }))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let (_, _, during) = call(&app, "GET", &format!("/v1/sessions/{id}/bev"), None).await;
    assert_ne!(before, during);
    let (_, _, body) = call(&app, "PUT", &format!("/v1/sessions/{id}/edits"), Some(json!({ "op": "remove", "id": 50 }))).await;
    assert_eq!(json_of(&body)["version"], 2);
    let (_, _, after) = call(&app, "GET", &format!("/v1/sessions/{id}/bev"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn ssaa_lowers_high_frequency_energy_on_a_checker() {
    let app = router(AppState::new());
    let create = json!({
        "height": 32, "width": 32, "margin_px": 4,
        "procedural": {
            "sigma_max": 50.0, "edge": 0.02, "palette": [[0.5, 0.5, 0.5]],
            "ground": { "kind": "checker", "a": [0.1, 0.1, 0.1], "b": [0.9, 0.9, 0.9], "cell": 0.17 }
        }
    });
    let (status, _, body) = call(&app, "POST", "/v1/sessions", Some(create)).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let id = json_of(&body)["id"].as_str().unwrap().to_string();
    let energy = |h: &axum::http::HeaderMap| {
        serde_json::from_str::<Value>(h[META_HEADER].to_str().unwrap()).unwrap()["high_frequency_energy"].as_f64().unwrap()
    };
    let (_, h1, _) = call(&app, "GET", &format!("/v1/sessions/{id}/render?w=48&h=48&samples=16&view=front&ssaa=1"), None).await;
    let (_, h4, _) = call(&app, "GET", &format!("/v1/sessions/{id}/render?w=48&h=48&samples=16&view=front&ssaa=4"), None).await;
    assert!(energy(&h4) < energy(&h1), "{} vs {}", energy(&h4), energy(&h1));
}
