use super::*;
use crate::data::{write_csv, Dataset, ScenarioKind, TriState};
use crate::engine::Claim;
use crate::synth::{generate, ScenarioSpec};
use axum::body::Body;
use axum::http::Request as HttpRequest;
use http_body_util::BodyExt;
use tower::ServiceExt;

const TOKEN: &str = "secret";
const BOUNDARY: &str = "XBOUNDARYX";

struct Harness {
    _dir: tempfile::TempDir,
    app: Arc<App>,
}

impl Harness {
    fn new() -> Self {
        Self::with_limit(50 * 1024 * 1024)
    }

    fn with_limit(max_upload_bytes: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let app = App::open(config(dir.path(), max_upload_bytes)).unwrap();
        Self { _dir: dir, app }
    }

    async fn send(&self, req: HttpRequest<Body>) -> (StatusCode, Value) {
        let resp = router(self.app.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let body = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, body)
    }

    async fn post_json(&self, path: &str, body: &str) -> (StatusCode, Value) {
        self.send(
            HttpRequest::post(format!("/api/v1{path}"))
                .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
        .await
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.send(
            HttpRequest::get(format!("/api/v1{path}"))
                .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
                .body(Body::empty())
                .unwrap(),
        )
        .await
    }

    async fn create(&self) -> String {
        let (s, b) = self.post_json("/sessions", "").await;
        assert_eq!(s, StatusCode::CREATED, "{b}");
        b["session_id"].as_str().unwrap().to_string()
    }

    async fn answer(&self, id: &str, question: &str, value: Value) -> (StatusCode, Value) {
        let body = json!({ "question": question, "value": value }).to_string();
        self.post_json(&format!("/sessions/{id}/answer"), &body).await
    }

    async fn upload(&self, id: &str, role: &str, csv: &str) -> (StatusCode, Value) {
        let body = format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"role\"\r\n\r\n{role}\r\n\
             --{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{role}.csv\"\r\n\
             Content-Type: text/csv\r\n\r\n{csv}\r\n--{BOUNDARY}--\r\n"
        );
        self.send(
            HttpRequest::post(format!("/api/v1/sessions/{id}/datasets"))
                .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
                .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
                .body(Body::from(body))
                .unwrap(),
        )
        .await
    }

    async fn test(&self, id: &str, body: Value) -> (StatusCode, Value) {
        self.post_json(&format!("/sessions/{id}/tests"), &body.to_string()).await
    }

    async fn view(&self, id: &str) -> SessionView {
        let (s, b) = self.get(&format!("/sessions/{id}")).await;
        assert_eq!(s, StatusCode::OK, "{b}");
        serde_json::from_value(b).unwrap()
    }

    /// Polls until no job is running.
    async fn settle(&self, id: &str) -> SessionView {
        loop {
            let v = self.view(id).await;
            if v.jobs.iter().all(|j| j.status != JobStatus::Running) {
                return v;
            }
            tokio::time::sleep(std::time::Duration::from_millis(20)).await;
        }
    }
}

fn config(dir: &std::path::Path, max_upload_bytes: u64) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        token: TOKEN.into(),
        max_upload_bytes,
        seed: 0,
        level: 0.05,
    }
}

fn csv_text(ds: &Dataset) -> String {
    let mut out = Vec::new();
    write_csv(ds, None, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn small_csv(offset: f64, labeled: bool) -> String {
    let mut s = String::from(if labeled { "a,b,label\n" } else { "a,b\n" });
    for i in 0..10 {
        let x = i as f64 + offset;
        if labeled {
            s.push_str(&format!("{x},{},{}\n", x * 0.5, if i % 2 == 0 { "pos" } else { "neg" }));
        } else {
            s.push_str(&format!("{x},{}\n", x * 0.5));
        }
    }
    s
}

#[tokio::test]
async fn sessions_are_created_with_fresh_ids() {
    let h = Harness::new();
    let (a, b) = (h.create().await, h.create().await);
    assert_ne!(a, b);
    assert_eq!(h.view(&a).await.step, Step::AwaitCausality);
    assert_eq!(h.post_json("/sessions", "{not json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(h.post_json("/sessions", r#"{"case":"nope"}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn bearer_token_is_required() {
    let h = Harness::new();
    let (s, _) = h
        .send(HttpRequest::post("/api/v1/sessions").body(Body::empty()).unwrap())
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = h
        .send(
            HttpRequest::get("/api/v1/openapi.json")
                .header(header::AUTHORIZATION, "Bearer wrong")
                .body(Body::empty())
                .unwrap(),
        )
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, doc) = h.get("/openapi.json").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(doc["openapi"], "3.1.0");
}

#[tokio::test]
async fn answers_follow_the_engine() {
    let h = Harness::new();
    let id = h.create().await;
    let (s, b) = h.answer(&id, "causality", json!("YtoX")).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["step"], "AwaitData");
    let (s, b) = h.answer(&id, "causality", json!("YtoX")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["allowed_inputs"], "data");
    assert_eq!(h.answer(&id, "favourite_colour", json!("red")).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.answer("missing", "causality", json!("YtoX")).await.0, StatusCode::NOT_FOUND);

    let other = h.create().await;
    let (s, b) = h.answer(&other, "causality", json!("Unknown")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(b["advisory"].as_str().unwrap().contains("causal research required"));
    assert_eq!(b["step"], "Diagnosed");
}

#[tokio::test]
async fn uploads_validate_and_gate_tests() {
    let h = Harness::new();
    let id = h.create().await;
    h.answer(&id, "causality", json!("XtoY")).await;
    let (s, b) = h.upload(&id, "source", &small_csv(0.0, true)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["pair_validated"], false);
    let (s, _) = h.test(&id, json!({"test": "feature_shift"})).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, b) = h.upload(&id, "target", "a,b\n1,2\n3,oops\n").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!((b["row"].as_u64(), b["column"].as_str()), (Some(2), Some("b")));

    let (s, b) = h.upload(&id, "target", &small_csv(0.5, false)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["pair_validated"], true);
    assert_eq!(b["step"], "Testing");
    assert_eq!(h.upload(&id, "target", &small_csv(0.5, false)).await.0, StatusCode::CONFLICT);

    let (s, b) = h.test(&id, json!({"test": "label_shift"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(b["error"], "target labels required");
    assert_eq!(h.test(&id, json!({"test": "astrology"})).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, b) = h.test(&id, json!({"test": "feature_shift"})).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    assert_eq!(b["status"], "done");
    assert_eq!(b["result"]["test"], "feature_shift");
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let h = Harness::with_limit(64);
    let id = h.create().await;
    let (s, _) = h.upload(&id, "source", &small_csv(0.0, true)).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn mismatched_pair_is_rejected() {
    let h = Harness::new();
    let id = h.create().await;
    h.upload(&id, "source", &small_csv(0.0, true)).await;
    let (s, _) = h.upload(&id, "target", "a\n1\n2\n").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(h.view(&id).await.datasets.target.is_none());
}

#[tokio::test]
async fn diagnosis_matches_direct_engine_replay() {
    let h = Harness::new();
    let pair = generate(&ScenarioSpec::new(ScenarioKind::Prior, 300, 11)).unwrap().pair;
    let id = h.create().await;
    h.answer(&id, "causality", json!("YtoX")).await;
    h.upload(&id, "source", &csv_text(&pair.source)).await;
    h.upload(&id, "target", &csv_text(&pair.target)).await;
    for t in [
        json!({"test": "label_shift"}),
        json!({"test": "class_conditional"}),
        json!({"test": "mmd", "permutations": 200}),
    ] {
        let (s, b) = h.test(&id, t).await;
        assert!(s.is_success(), "{b}");
    }
    let (s, b) = h.test(&id, json!({"test": "fit_source_model"})).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{b}");
    assert_eq!(b["status"], "running");
    let settled = h.settle(&id).await;
    assert!(settled.jobs.iter().all(|j| j.status == JobStatus::Done), "{:?}", settled.jobs);
    h.answer(&id, "done_testing", Value::Null).await;
    let assertions = json!([{"claim": "performance_drop", "value": "Yes", "justification": "observed"}]);
    let (s, b) = h.answer(&id, "assertions", assertions).await;
    assert_eq!(s, StatusCode::OK, "{b}");

    let view = h.view(&id).await;
    let served = view.state.diagnosis.clone().expect("diagnosed");
    assert_eq!(served.scenario.kind(), ScenarioKind::Prior);

    // Replay the recorded inputs against the engine with the same data.
    let stored = store::pair_from_files(
        &h._dir.path().join("sessions").join(&id),
        view.datasets.source.as_ref().unwrap(),
        view.datasets.target.as_ref().unwrap(),
    )
    .unwrap();
    let mut state = SessionState::new(&id, 0, 0);
    for input in &view.inputs {
        state = advance_session(&state, input, Some(&stored), 0).unwrap();
    }
    assert_eq!(state.diagnosis.as_ref(), Some(&served));
    assert_eq!(state.evidence, view.state.evidence);
    assert_eq!(
        state.history.iter().map(|t| &t.input).collect::<Vec<_>>(),
        view.state.history.iter().map(|t| &t.input).collect::<Vec<_>>()
    );
    let asserted = state.evidence.unwrap().assertion(Claim::PerformanceDrop).map(|a| a.value);
    assert_eq!(asserted, Some(TriState::Yes));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_answers_are_serialized() {
    let h = Arc::new(Harness::new());
    let id = h.create().await;
    let mut tasks = Vec::new();
    for i in 0..100 {
        let (h, id) = (h.clone(), id.clone());
        tasks.push(tokio::spawn(async move {
            let value = if i % 2 == 0 { "YtoX" } else { "XtoY" };
            h.answer(&id, "causality", json!(value)).await.0
        }));
    }
    let mut codes = Vec::new();
    for t in tasks {
        codes.push(t.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::OK).count(), 1);
    assert!(codes.iter().all(|c| *c == StatusCode::OK || *c == StatusCode::CONFLICT));
    let view = h.view(&id).await;
    let hist = &view.state.history;
    assert_eq!(hist.len(), 1);
    assert_eq!((hist[0].from, hist[0].to), (Step::AwaitCausality, Step::AwaitData));
    for w in hist.windows(2) {
        assert_eq!(w[0].to, w[1].from);
    }
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let h = Harness {
            _dir: tempfile::tempdir().unwrap(),
            app: App::open(config(dir.path(), 1 << 20)).unwrap(),
        };
        let id = h.create().await;
        h.answer(&id, "causality", json!("XtoY")).await;
        h.upload(&id, "source", &small_csv(0.0, true)).await;
        h.upload(&id, "target", &small_csv(1.0, true)).await;
        id
    };
    let h = Harness {
        _dir: tempfile::tempdir().unwrap(),
        app: App::open(config(dir.path(), 1 << 20)).unwrap(),
    };
    let v = h.view(&id).await;
    assert_eq!(v.step, Step::Testing);
    assert_eq!(h.test(&id, json!({"test": "label_shift"})).await.0, StatusCode::OK);
}

#[tokio::test]
async fn canned_case_replays_to_a_diagnosis() {
    let h = Harness::new();
    for case in canned_cases() {
        let body = json!({ "case": case.key }).to_string();
        let (s, b) = h.post_json("/sessions", &body).await;
        assert_eq!(s, StatusCode::CREATED, "{b}");
        let v = h.view(b["session_id"].as_str().unwrap()).await;
        assert_eq!(v.state.diagnosis.unwrap().scenario.kind(), case.expected);
    }
}
