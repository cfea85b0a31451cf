use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vidmod_core::corpus::write_corpus;
use vidmod_core::fixtures;
use vidmod_core::synth::synthesize_corpus;
use vidmod_core::{RiskTaxonomy, SynthConfig, VideoRecord};
use vidmod_service::{router, AppState, ServiceConfig};

struct Harness {
    dir: tempfile::TempDir,
    config: ServiceConfig,
    corpus: Vec<VideoRecord>,
}

impl Harness {
    fn new(auto_n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let tax = RiskTaxonomy::builtin();
        let mut corpus = synthesize_corpus(&SynthConfig::new(24, 0.5, 17), &tax).unwrap();
        let mut silent = fixtures::eq1_video();
        silent.video_id = "zz-silent".into();
        silent.audio.clear();
        silent.frames[0].thumbnail = Some("thumbs/a.png".into());
        corpus.push(silent);
        let corpus_path = dir.path().join("corpus.jsonl");
        write_corpus(&corpus_path, &corpus).unwrap();
        std::fs::create_dir_all(dir.path().join("thumbs")).unwrap();
        std::fs::write(dir.path().join("thumbs/a.png"), b"\x89PNG fake").unwrap();

        let mut config = ServiceConfig { corpus_path: Some(corpus_path), data_dir: dir.path().join("data"), ..Default::default() };
        config.train.auto_n = auto_n;
        config.train.epochs = 200;
        let corpus = vidmod_core::corpus::load_corpus(config.corpus_path.as_ref().unwrap()).unwrap();
        Harness { dir, config, corpus }
    }

    fn app(&self) -> Router {
        router(AppState::open(self.config.clone()).unwrap())
    }

    fn deviant_ids(&self) -> Vec<String> {
        self.corpus
            .iter()
            .filter(|v| v.ground_truth.is_some_and(|l| l.is_deviant()))
            .map(|v| v.video_id.clone())
            .collect()
    }

    fn normal_ids(&self) -> Vec<String> {
        self.corpus
            .iter()
            .filter(|v| v.ground_truth.is_some_and(|l| !l.is_deviant()))
            .map(|v| v.video_id.clone())
            .collect()
    }

    fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
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
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

async fn get_json(app: &Router, uri: &str) -> Value {
    let (status, body) = call(app, "GET", uri, None).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

fn deviant_review(moderator: &str) -> Value {
    json!({"label": "protected_products", "evidence": {"frame_times": [0.0], "words": []}, "moderator_id": moderator})
}

fn normal_review(moderator: &str) -> Value {
    json!({"label": "normal", "moderator_id": moderator})
}

fn queue_ids(queue: &Value) -> Vec<String> {
    queue.as_array().unwrap().iter().map(|i| i["video_id"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn queue_holds_exactly_the_deviant_videos() {
    let h = Harness::new(0);
    let app = h.app();
    let queue = get_json(&app, "/queue?threshold=0.5").await;
    let mut ids = queue_ids(&queue);
    let scores: Vec<f64> = queue.as_array().unwrap().iter().map(|i| i["risk_value"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    ids.sort();
    let mut expected = h.deviant_ids();
    expected.push("zz-silent".into()); // eq1 fixture without audio scores 0.6
    expected.sort();
    assert_eq!(ids, expected);

    assert!(get_json(&app, "/queue?threshold=1").await.as_array().unwrap().is_empty());
    assert_eq!(call(&app, "GET", "/queue?threshold=1.5", None).await.0, StatusCode::BAD_REQUEST);

    let bare = router(AppState::open(ServiceConfig { data_dir: h.dir.path().join("bare"), ..Default::default() }).unwrap());
    let (status, body) = call(&bare, "GET", "/queue", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["code"], "no_corpus");
}

#[tokio::test]
async fn review_rules() {
    let h = Harness::new(0);
    let app = h.app();
    let target = h.deviant_ids()[0].clone();
    let uri = format!("/videos/{target}/review");

    let no_evidence = json!({"label": "sensitive_content", "evidence": {}, "moderator_id": "m1"});
    assert_eq!(call(&app, "POST", &uri, Some(no_evidence)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(
        call(&app, "POST", "/videos/nope/review", Some(deviant_review("m1"))).await.0,
        StatusCode::NOT_FOUND
    );
    let bad_label = json!({"label": "spam", "moderator_id": "m1"});
    assert_eq!(call(&app, "POST", &uri, Some(bad_label)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, "POST", &uri, Some(deviant_review("m1"))).await;
    assert_eq!(status, StatusCode::OK);
    let receipt: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(receipt["accepted"], true);
    assert_eq!(receipt["review_count"], 1);

    assert_eq!(call(&app, "POST", &uri, Some(deviant_review("m1"))).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, "POST", &uri, Some(normal_review("m2"))).await.0, StatusCode::OK);

    let queue = get_json(&app, "/queue?threshold=0.5").await;
    assert!(!queue_ids(&queue).contains(&target));

    let log = std::fs::read_to_string(h.data_dir().join("reviews.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[tokio::test]
async fn layouts_are_valid_cached_and_stable() {
    let h = Harness::new(0);
    let app = h.app();
    let id = h.deviant_ids()[1].clone();

    let (s1, b1) = call(&app, "GET", &format!("/videos/{id}/frames"), None).await;
    let (_, b2) = call(&app, "GET", &format!("/videos/{id}/frames"), None).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(b1, b2);
    // a fresh process produces the same bytes
    let (_, b3) = call(&h.app(), "GET", &format!("/videos/{id}/frames"), None).await;
    assert_eq!(b1, b3);

    let view: Value = serde_json::from_slice(&b1).unwrap();
    let frame_count = h.corpus.iter().find(|v| v.video_id == id).unwrap().frames.len();
    let mut seen: Vec<u64> = Vec::new();
    let mut rows: Vec<u64> = Vec::new();
    for scene in view["scenes"].as_array().unwrap() {
        rows.push(scene["row"].as_u64().unwrap());
        let mut members = Vec::new();
        for shot in scene["shots"].as_array().unwrap() {
            let idx: Vec<u64> = shot["frames"].as_array().unwrap().iter().map(|f| f["idx"].as_u64().unwrap()).collect();
            assert!(idx.windows(2).all(|w| w[1] == w[0] + 1), "shot not contiguous");
            members.extend(idx.iter().copied());
            seen.extend(idx);
        }
        assert!(members.contains(&scene["rep_frame"].as_u64().unwrap()));
    }
    seen.sort_unstable();
    assert_eq!(seen, (0..frame_count as u64).collect::<Vec<_>>());
    rows.sort_unstable();
    assert_eq!(rows, (0..rows.len() as u64).collect::<Vec<_>>());

    let video = get_json(&app, &format!("/videos/{id}")).await;
    let timeline = video["timeline"].as_array().unwrap();
    assert_eq!(timeline[0]["t0"], 0.0);
    assert_eq!(timeline.last().unwrap()["t1"], video["metadata"]["duration"]);
    assert!(video["risk"]["risk_value"].as_f64().unwrap() > 0.5);

    let audio = get_json(&app, &format!("/videos/{id}/audio")).await;
    assert!(!audio["histogram"].as_array().unwrap().is_empty());
    let silent = get_json(&app, "/videos/zz-silent/audio").await;
    assert!(silent["histogram"].as_array().unwrap().is_empty());

    assert_eq!(call(&app, "GET", "/videos/nope/frames", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/videos/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn thumbnails() {
    let h = Harness::new(0);
    let app = h.app();
    let (status, body) = call(&app, "GET", "/videos/zz-silent/thumb/0", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&body[..], b"\x89PNG fake");
    let (status, body) = call(&app, "GET", "/videos/zz-silent/thumb/1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8_lossy(&body).starts_with("<svg"));
    assert_eq!(call(&app, "GET", "/videos/zz-silent/thumb/2", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn training_swaps_the_model_and_survives_restart() {
    let h = Harness::new(0);
    let app = h.app();
    assert_eq!(call(&app, "POST", "/train", None).await.0, StatusCode::CONFLICT);

    let deviant = h.deviant_ids();
    let normal = h.normal_ids();
    call(&app, "POST", &format!("/videos/{}/review", deviant[0]), Some(deviant_review("m1"))).await;
    let (status, body) = call(&app, "POST", "/train", None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{}", String::from_utf8_lossy(&body));

    for id in deviant.iter().skip(1).take(5) {
        call(&app, "POST", &format!("/videos/{id}/review"), Some(deviant_review("m1"))).await;
    }
    for id in normal.iter().take(6) {
        call(&app, "POST", &format!("/videos/{id}/review"), Some(normal_review("m1"))).await;
    }
    let first: Value = serde_json::from_slice(&call(&app, "POST", "/train", None).await.1).unwrap();
    assert_eq!(first["version"], 1);
    let second: Value = serde_json::from_slice(&call(&app, "POST", "/train", None).await.1).unwrap();
    assert_eq!(second["version"], 2);
    let s1: Value = serde_json::from_slice(&std::fs::read(h.data_dir().join("model-000001.json")).unwrap()).unwrap();
    let s2: Value = serde_json::from_slice(&std::fs::read(h.data_dir().join("model-000002.json")).unwrap()).unwrap();
    assert_eq!(s1["weights"], s2["weights"]);

    let model = get_json(&app, "/model").await;
    assert_eq!(model["version"], 2);
    assert_eq!(model["stage"], "learned");

    // served queue order equals the order recomputed from the current model
    let queue = get_json(&app, "/queue?threshold=0.5").await;
    let current = vidmod_core::FilterModel::load(h.data_dir().join("model-000002.json")).unwrap();
    let tax = RiskTaxonomy::builtin();
    let reviewed: Vec<&String> = deviant.iter().take(6).chain(normal.iter().take(6)).collect();
    let mut expected: Vec<(f64, String)> = h
        .corpus
        .iter()
        .filter(|v| !reviewed.contains(&&v.video_id))
        .map(|v| (current.score(v, &tax).unwrap(), v.video_id.clone()))
        .filter(|(s, _)| *s > 0.5)
        .collect();
    expected.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    assert_eq!(queue_ids(&queue), expected.into_iter().map(|e| e.1).collect::<Vec<_>>());

    // restart
    let restarted = h.app();
    assert_eq!(get_json(&restarted, "/model").await, model);
    assert_eq!(get_json(&restarted, "/queue?threshold=0.5").await, queue);
    let (status, _) =
        call(&restarted, "POST", &format!("/videos/{}/review", deviant[0]), Some(deviant_review("m1"))).await;
    assert_eq!(status, StatusCode::CONFLICT, "replayed log must still reject duplicates");
}

#[tokio::test]
async fn auto_retrain_every_n_reviews() {
    let h = Harness::new(4);
    let state: Arc<AppState> = AppState::open(h.config.clone()).unwrap();
    let app = router(state.clone());
    let (deviant, normal) = (h.deviant_ids(), h.normal_ids());
    for id in deviant.iter().take(2) {
        call(&app, "POST", &format!("/videos/{id}/review"), Some(deviant_review("m1"))).await;
    }
    call(&app, "POST", &format!("/videos/{}/review", normal[0]), Some(normal_review("m1"))).await;
    let (_, body) = call(&app, "POST", &format!("/videos/{}/review", normal[1]), Some(normal_review("m1"))).await;
    let receipt: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(receipt["training_triggered"], true);
    for _ in 0..200 {
        if state.model().version == 1 {
            return;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("auto-retrain did not produce version 1");
}

#[tokio::test]
async fn metrics_and_palette() {
    let h = Harness::new(0);
    let app = h.app();
    let (deviant, normal) = (h.deviant_ids(), h.normal_ids());
    call(&app, "POST", &format!("/videos/{}/review", deviant[0]), Some(deviant_review("m1"))).await;
    call(&app, "POST", &format!("/videos/{}/review", deviant[1]), Some(normal_review("m1"))).await;
    call(&app, "POST", &format!("/videos/{}/review", normal[0]), Some(normal_review("m1"))).await;
    let m = get_json(&app, "/metrics?hours=0.5").await;
    assert_eq!(m["time_efficiency"], 6.0);
    assert_eq!(m["missing_rate"], 0.5);
    assert_eq!(call(&app, "GET", "/metrics", None).await.0, StatusCode::BAD_REQUEST);

    // the fixture video has no ground truth
    call(&app, "POST", "/videos/zz-silent/review", Some(normal_review("m1"))).await;
    assert_eq!(call(&app, "GET", "/metrics?hours=1", None).await.0, StatusCode::CONFLICT);

    let palette = get_json(&app, "/palette").await;
    assert_eq!(palette["categories"].as_object().unwrap().len(), 4);
    assert!(palette["neutral"].is_string());
}
