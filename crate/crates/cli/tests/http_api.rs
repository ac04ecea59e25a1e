use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mobo_cli::service::{router, AppState, ParetoView, SessionView};
use mobo_core::acquisition::sobol_designs;
use mobo_core::{
    AcquisitionConfig, FitOptions, Phase, QuestionnaireResponse, SessionConfig, SessionStore, SyntheticRater,
};
use serde_json::{json, Value};
use tower::ServiceExt;

fn config() -> SessionConfig {
    SessionConfig {
        acquisition: AcquisitionConfig { n_candidates: 64, n_mc_samples: 32, ..Default::default() },
        fit: FitOptions { restarts: 2, max_iters: 40, ..Default::default() },
        ..Default::default()
    }
}

fn app(dir: &std::path::Path) -> (Router, Arc<AppState>) {
    let state = Arc::new(AppState::new(SessionStore::open(dir).unwrap(), config(), Duration::from_secs(60)));
    (router(state.clone()), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn rating(rater: &SyntheticRater, view: &SessionView) -> Value {
    let d = view.design.as_ref().expect("a design is pending");
    let r = rater.rate(&d.params, d.iteration as u64, &config().scales);
    let mut v = serde_json::to_value(r).unwrap();
    v["iteration"] = json!(d.iteration);
    v
}

fn never_perfect() -> SyntheticRater {
    SyntheticRater { utility_ceiling: 0.9, noise_sd: 0.05, ..SyntheticRater::new([0.7; 9], 3) }
}

#[tokio::test]
async fn create_returns_first_sobol_point_with_rendering() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"session_id": "alpha"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let v: SessionView = serde_json::from_slice(&body).unwrap();
    assert_eq!((v.session_id.as_str(), v.iteration, v.phase), ("alpha", 0, Phase::Sampling));
    let d = v.design.unwrap();
    assert_eq!(d.iteration, 1);
    assert_eq!(d.params, sobol_designs(&config().acquisition)[0]);
    assert_eq!(d.rendering, d.params.resolve());
    let raw = json_of(&body);
    assert!(raw["design"]["rendering"]["blink_hz"].is_number());

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"session_id": "alpha"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(json_of(&body)["session_id"].as_str().unwrap().starts_with("s-"));
}

#[tokio::test]
async fn full_session_finishes_on_the_twentieth_rating() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (_, body) = call(&app, "POST", "/sessions", Some(json!({"session_id": "full", "seed": 4}))).await;
    let mut view: SessionView = serde_json::from_slice(&body).unwrap();
    let rater = never_perfect();
    for k in 1..=20 {
        assert!(!view.finished, "finished before rating {k}");
        let (status, body) = call(&app, "POST", "/sessions/full/rating", Some(rating(&rater, &view))).await;
        assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
        view = serde_json::from_slice(&body).unwrap();
        assert_eq!(view.iteration, k);
        let expected = if k < 5 { Phase::Sampling } else if k < 20 { Phase::Optimization } else { Phase::Finished };
        assert_eq!(view.phase, expected, "after rating {k}");
    }
    assert!(view.finished && !view.stopped_early && view.design.is_none());

    let resp = serde_json::to_value(QuestionnaireResponse::perfect(&config().scales, 1.0)).unwrap();
    let (status, body) = call(&app, "POST", "/sessions/full/rating", Some(resp)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"], "session_finished");

    let (status, body) = call(&app, "GET", "/sessions/full/pareto", None).await;
    assert_eq!(status, StatusCode::OK);
    let p: ParetoView = serde_json::from_slice(&body).unwrap();
    assert!(!p.points.is_empty() && p.hypervolume > 0.0);
    assert_eq!(p.reference, vec![-1.1; 7]);

    let (status, body) = call(&app, "GET", "/sessions/full/export", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(body).unwrap().lines().count(), 20);
    let (_, body) = call(&app, "GET", "/sessions/full/export?format=events", None).await;
    // started + 20 issued + 20 ratings + finished
    assert_eq!(String::from_utf8(body).unwrap().lines().count(), 42);
}

#[tokio::test]
async fn perfect_rating_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    call(&app, "POST", "/sessions", Some(json!({"session_id": "p"}))).await;
    let resp = serde_json::to_value(QuestionnaireResponse::perfect(&config().scales, 0.0)).unwrap();
    let (status, body) = call(&app, "POST", "/sessions/p/rating", Some(resp)).await;
    assert_eq!(status, StatusCode::OK);
    let v: SessionView = serde_json::from_slice(&body).unwrap();
    assert!(v.finished && v.stopped_early);
    assert_eq!(v.iteration, 1);
}

#[tokio::test]
async fn invalid_payloads_are_422() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    call(&app, "POST", "/sessions", Some(json!({"session_id": "v"}))).await;
    let mut resp = serde_json::to_value(QuestionnaireResponse::perfect(&config().scales, 3.0)).unwrap();
    resp["trust_items"] = json!([6, 5]);
    let (status, body) = call(&app, "POST", "/sessions/v/rating", Some(resp)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["error"], "scale_violation");

    let (status, body) = call(&app, "POST", "/sessions/v/rating", Some(json!({"trust_items": [1]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["error"], "invalid_payload");

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"session_id": "bad id!"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Nothing was applied.
    let (_, body) = call(&app, "GET", "/sessions/v", None).await;
    assert_eq!(json_of(&body)["iteration"], 0);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    for (m, uri) in [
        ("GET", "/sessions/nope"),
        ("GET", "/sessions/nope/pareto"),
        ("GET", "/sessions/nope/export"),
        ("GET", "/sessions/..%2Fetc"),
    ] {
        let (status, body) = call(&app, m, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        if !body.is_empty() {
            assert_eq!(json_of(&body)["error"], "session_not_found");
        }
    }
    let resp = serde_json::to_value(QuestionnaireResponse::perfect(&config().scales, 3.0)).unwrap();
    let (status, _) = call(&app, "POST", "/sessions/nope/rating", Some(resp)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn retried_rating_is_rejected_not_reapplied() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (_, body) = call(&app, "POST", "/sessions", Some(json!({"session_id": "idem"}))).await;
    let view: SessionView = serde_json::from_slice(&body).unwrap();
    let r = rating(&never_perfect(), &view);
    let (status, _) = call(&app, "POST", "/sessions/idem/rating", Some(r.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&app, "POST", "/sessions/idem/rating", Some(r.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"], "duplicate_rating");

    let mut ahead = r;
    ahead["iteration"] = json!(5);
    let (status, body) = call(&app, "POST", "/sessions/idem/rating", Some(ahead)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"], "iteration_mismatch");

    let (_, body) = call(&app, "GET", "/sessions/idem", None).await;
    assert_eq!(json_of(&body)["iteration"], 1);
}

#[tokio::test]
async fn restart_replays_sessions_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let rater = never_perfect();
    let export_before = {
        let (app, _) = app(dir.path());
        let (_, body) = call(&app, "POST", "/sessions", Some(json!({"session_id": "r", "seed": 11}))).await;
        let mut view: SessionView = serde_json::from_slice(&body).unwrap();
        for _ in 0..8 {
            let (_, body) = call(&app, "POST", "/sessions/r/rating", Some(rating(&rater, &view))).await;
            view = serde_json::from_slice(&body).unwrap();
        }
        call(&app, "GET", "/sessions/r/export", None).await.1
    };
    let (app, state) = app(dir.path());
    assert_eq!(state.resident(), 0);
    let (_, body) = call(&app, "GET", "/sessions/r", None).await;
    let view: SessionView = serde_json::from_slice(&body).unwrap();
    assert_eq!(view.iteration, 8);
    assert_eq!(call(&app, "GET", "/sessions/r/export", None).await.1, export_before);
    let (status, _) = call(&app, "POST", "/sessions/r/rating", Some(rating(&rater, &view))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn idle_sessions_are_evicted_and_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(SessionStore::open(dir.path()).unwrap(), config(), Duration::from_millis(1)));
    let app = router(state.clone());
    call(&app, "POST", "/sessions", Some(json!({"session_id": "e"}))).await;
    assert_eq!(state.resident(), 1);
    tokio::time::sleep(Duration::from_millis(5)).await;
    assert_eq!(state.evict_idle(), 1);
    assert_eq!(state.resident(), 0);
    let (status, body) = call(&app, "GET", "/sessions/e", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["iteration"], 0);
}
