mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use coopera::agents::{MockProvider, ProviderError, SchemaError};
use coopera::analytics;
use coopera::api::{router, status_for, AppState, REVISION_HEADER};
use coopera::clock::LogicalClock;
use coopera::model::{screenplay, ProjectId, ScriptProject, Stage, ValidationReport};
use coopera::pipeline::Engine;
use coopera::store::{StorageError, Store};
use coopera::Error;
use common::{engine, seeded, LOGLINE};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Svc {
    app: Router,
    dir: tempfile::TempDir,
}

fn service() -> Svc {
    service_with(engine(), Duration::from_secs(10))
}

fn service_with(engine: Engine, threshold: Duration) -> Svc {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    Svc {
        app: router(AppState::with_job_threshold(engine, store, threshold)),
        dir,
    }
}

impl Svc {
    async fn raw(&self, method: &str, uri: &str, headers: &[(&str, &str)], body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, bytes.to_vec())
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        self.call_h(method, uri, &[], body).await
    }

    async fn call_h(&self, method: &str, uri: &str, headers: &[(&str, &str)], body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.raw(method, uri, headers, body).await;
        let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        (status, value)
    }

    async fn create(&self) -> ScriptProject {
        let (status, body) = self
            .call("POST", "/projects", Some(json!({"title": "The Diary", "logline_draft": LOGLINE})))
            .await;
        assert_eq!(status, StatusCode::CREATED);
        serde_json::from_value(body).unwrap()
    }

    fn stored(&self, id: &ProjectId) -> ScriptProject {
        Store::open(self.dir.path()).unwrap().load(id).unwrap()
    }
}

fn project_of(body: &Value) -> ScriptProject {
    let inner = if body.get("project").is_some() { &body["project"] } else { body };
    serde_json::from_value(inner.clone()).unwrap()
}

fn same_content(a: &ScriptProject, b: &ScriptProject) {
    for s in Stage::ALL {
        assert_eq!(a.content(s), b.content(s), "{s} content");
        assert_eq!(a.state(s), b.state(s), "{s} state");
    }
    assert_eq!(a.revision, b.revision);
}

#[tokio::test]
async fn healthz_reports_version() {
    let svc = service();
    let (status, body) = svc.call("GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(body["provider"], "mock");
}

#[tokio::test]
async fn create_get_list() {
    let svc = service();
    let p = svc.create().await;
    assert_eq!(p.logline.text, LOGLINE);
    let (status, body) = svc.call("GET", &format!("/projects/{}", p.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(project_of(&body), p);
    let (_, list) = svc.call("GET", "/projects", None).await;
    assert_eq!(list["projects"][0]["id"], json!(p.id));
    let (status, body) = svc.call("GET", "/projects/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "NOT_FOUND");
    assert_eq!(body["http_status"], 404);
}

#[tokio::test]
async fn generate_out_of_order_is_409_stage_order() {
    let svc = service();
    let p = svc.create().await;
    let (status, body) = svc
        .call("POST", &format!("/projects/{}/stages/plots/generate", p.id), Some(json!({})))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "STAGE_ORDER");
    assert_eq!(body["details"]["missing"], "logline");
    let (status, body) = svc
        .call("POST", &format!("/projects/{}/stages/chapters/generate", p.id), Some(json!({})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "INVALID_REQUEST");
}

#[tokio::test]
async fn every_stage_matches_direct_engine_calls() {
    let svc = service();
    let created = svc.create().await;
    let direct = engine();
    let mut expected = created.clone();
    for stage in Stage::ALL {
        if stage != Stage::Logline {
            let (status, body) = svc
                .call(
                    "POST",
                    &format!("/projects/{}/stages/{stage}/generate", created.id),
                    Some(json!({"seed": 9})),
                )
                .await;
            assert_eq!(status, StatusCode::OK, "{body}");
            expected = direct.generate_stage(&expected, stage, &seeded(9)).unwrap().project;
            same_content(&project_of(&body), &expected);
            assert!(body["attempts"].as_u64().unwrap() >= 1);
        }
        let (status, body) = svc
            .call("POST", &format!("/projects/{}/stages/{stage}/confirm", created.id), Some(json!({})))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        expected = direct.confirm_stage(&expected, stage, None).unwrap();
        same_content(&project_of(&body), &expected);
    }
    same_content(&svc.stored(&created.id), &expected);
    let (_, v) = svc.call("GET", &format!("/projects/{}/validation", created.id), None).await;
    assert_eq!(v["violations"], json!([]));
    let (_, s) = svc.call("GET", &format!("/projects/{}/staleness", created.id), None).await;
    assert!(Stage::ALL.iter().all(|st| s["stages"][st.as_str()] == "fresh"));
}

async fn completed(svc: &Svc) -> ScriptProject {
    let p = svc.create().await;
    svc.call("POST", &format!("/projects/{}/stages/logline/confirm", p.id), Some(json!({}))).await;
    let (status, body) = svc
        .call("POST", &format!("/projects/{}/stages/characters/cascade", p.id), Some(json!({"seed": 4})))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    project_of(&body)
}

#[tokio::test]
async fn cascade_matches_engine_and_rejects_logline() {
    let svc = service();
    let p = completed(&svc).await;
    assert!(Stage::ALL.iter().all(|s| p.is_confirmed(*s)));
    let direct = engine();
    let base = direct.confirm_stage(&svc.create().await, Stage::Logline, None).unwrap();
    let expected = direct.regenerate_cascade(&base, Stage::Characters, &seeded(4)).unwrap();
    for s in Stage::ALL {
        assert_eq!(p.content(s), expected.content(s));
    }
    let (status, _) = svc
        .call("POST", &format!("/projects/{}/stages/logline/cascade", p.id), Some(json!({})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn repeated_confirm_with_same_revision_is_409() {
    let svc = service();
    let p = svc.create().await;
    let uri = format!("/projects/{}/stages/logline/confirm", p.id);
    let body = json!({"expected_revision": p.revision});
    let (first, confirmed) = svc.call("POST", &uri, Some(body.clone())).await;
    assert_eq!(first, StatusCode::OK);
    let (second, err) = svc.call("POST", &uri, Some(body)).await;
    assert_eq!(second, StatusCode::CONFLICT);
    assert_eq!(err["code"], "CONFLICT");
    assert_eq!(svc.stored(&p.id), project_of(&confirmed));
    assert_eq!(svc.stored(&p.id).revision, p.revision + 1);
}

#[tokio::test]
async fn patch_needs_revision_header_and_marks_downstream_stale() {
    let svc = service();
    let p = completed(&svc).await;
    let uri = format!("/projects/{}/elements/logline", p.id);
    let patch = json!({"text": format!("{LOGLINE} Then the diary disappears.")});
    let (status, body) = svc.call("PATCH", &uri, Some(patch.clone())).await;
    assert_eq!(status, StatusCode::PRECONDITION_REQUIRED);
    assert_eq!(body["code"], "REVISION_REQUIRED");
    let old = (p.revision - 1).to_string();
    let (status, _) = svc.call_h("PATCH", &uri, &[(REVISION_HEADER, &old)], Some(patch.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let rev = p.revision.to_string();
    let (status, body) = svc.call_h("PATCH", &uri, &[(REVISION_HEADER, &rev)], Some(patch)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (_, s) = svc.call("GET", &format!("/projects/{}/staleness", p.id), None).await;
    assert_eq!(s["stages"]["logline"], "fresh");
    for st in ["characters", "plots", "scenes", "dialogues"] {
        assert_eq!(s["stages"][st], "stale", "{st}");
    }
    let (status, body) = svc
        .call_h("PATCH", &format!("/projects/{}/elements/chr-nope", p.id), &[(REVISION_HEADER, "99")], Some(json!({"name": "X"})))
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
}

#[tokio::test]
async fn diff_endpoint_equals_analytics_on_rendered_texts() {
    let svc = service();
    let p = completed(&svc).await;
    let c = &p.characters[0];
    let rev = p.revision.to_string();
    let (status, _) = svc
        .call_h(
            "PATCH",
            &format!("/projects/{}/elements/{}", p.id, c.id),
            &[(REVISION_HEADER, &rev)],
            Some(json!({"personality": "quiet, stubborn and secretly funny"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = svc.call("GET", &format!("/projects/{}/diff/characters", p.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let stored = svc.stored(&p.id);
    let (original, current) = analytics::stage_diff_texts(&stored, Stage::Characters).unwrap();
    let report = analytics::compare(&original, &current);
    assert_eq!(body["original_text"], json!(original));
    assert_eq!(body["current_text"], json!(current));
    assert_eq!(body["absolute_distance"], json!(report.absolute_distance));
    assert_eq!(body["deleted_length"], json!(report.deleted_length));
    assert_eq!(body["inserted_length"], json!(report.inserted_length));
    assert_eq!(body["jaccard"], json!(report.jaccard));
    assert!(report.absolute_distance > 0);
    let (status, _) = svc.call("GET", &format!("/projects/{}/diff/logline", p.id), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_bodies() {
    let svc = service();
    let p = completed(&svc).await;
    let (status, json_body) = svc.raw("GET", &format!("/projects/{}/export?format=json", p.id), &[], None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(json_body.clone()).unwrap(), svc.stored(&p.id).to_canonical_json());

    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = coopera::cli::main_with(
        [
            "coopera",
            "--mock",
            "--data-dir",
            svc.dir.path().to_str().unwrap(),
            "export",
            "--project",
            p.id.as_str(),
            "--format",
            "json",
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    assert_eq!(out, json_body);

    let (status, text) = svc.raw("GET", &format!("/projects/{}/export?format=screenplay", p.id), &[], None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(text).unwrap(), screenplay(&p));
    let (status, _) = svc.raw("GET", &format!("/projects/{}/export?format=pdf", p.id), &[], None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sus_endpoint_three_input_forms() {
    let svc = service();
    let means = [3.58, 2.5, 3.58, 2.5, 3.17, 3.42, 3.17, 3.08, 3.42, 2.83];
    let (status, body) = svc.call("POST", "/analytics/sus", Some(json!({"adjusted_item_means": means}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!((body["composite_mean"].as_f64().unwrap() - 78.125).abs() < 0.01);
    assert!((body["subscale_means"]["learnable"].as_f64().unwrap() - 3.125).abs() < 1e-9);

    let rows = json!({"responses": [
        {"respondent_id": "a", "raw": [5, 1, 5, 1, 5, 1, 5, 1, 5, 1]},
        {"respondent_id": "b", "raw": [3, 3, 3, 3, 3, 3, 3, 3, 3, 3]}
    ]});
    let (status, body) = svc.call("POST", "/analytics/sus", Some(rows)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["composite_mean"], 75.0);

    let csv = "id,Q1,Q2,Q3,Q4,Q5,Q6,Q7,Q8,Q9,Q10\nx,5,1,5,1,5,1,5,1,5,1\n";
    let (status, body) = svc.call("POST", "/analytics/sus", Some(json!({"csv": csv}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["composite_mean"], 100.0);

    let bad = json!({"responses": [{"respondent_id": "a", "raw": [9, 1, 5, 1, 5, 1, 5, 1, 5, 1]}]});
    let (status, body) = svc.call("POST", "/analytics/sus", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "VALIDATION");
}

#[tokio::test]
async fn compare_endpoint() {
    let svc = service();
    let (status, body) = svc
        .call("POST", "/analytics/compare", Some(json!({"original": "kitten", "revised": "sitting"})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["absolute_distance"], 3);
    assert_eq!(body["deleted_length"], 2);
    assert_eq!(body["inserted_length"], 3);
}

#[tokio::test]
async fn tutor_chat_and_history() {
    let svc = service();
    let p = svc.create().await;
    let uri = format!("/projects/{}/stages/logline/tutor", p.id);
    let (status, body) = svc.call("POST", &uri, Some(json!({"message": "Is my idea too simple?"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["reply"].as_str().unwrap().contains('?'));
    let (_, session) = svc.call("GET", &uri, None).await;
    assert_eq!(session["session"]["messages"].as_array().unwrap().len(), 2);
    let (status, _) = svc.call("POST", &uri, Some(json!({"message": "  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let done = completed(&svc).await;
    let (_, h) = svc.call("GET", &format!("/projects/{}/history?stage=plots", done.id), None).await;
    let entries = h["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e["stage"] == "plots"));
}

#[tokio::test(flavor = "multi_thread")]
async fn slow_generation_returns_202_and_a_poll_url() {
    let provider = MockProvider::new().with_delay(Duration::from_millis(400));
    let slow = Engine::new(Arc::new(provider), Arc::new(LogicalClock::default()));
    let svc = service_with(slow, Duration::from_millis(50));
    let p = svc.create().await;
    svc.call("POST", &format!("/projects/{}/stages/logline/confirm", p.id), Some(json!({}))).await;
    let (status, body) = svc
        .call("POST", &format!("/projects/{}/stages/characters/generate", p.id), Some(json!({})))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(body["status"], "pending");
    let poll = body["poll_url"].as_str().unwrap().to_string();
    let mut last = Value::Null;
    for _ in 0..100 {
        let (status, job) = svc.call("GET", &poll, None).await;
        assert_eq!(status, StatusCode::OK);
        last = job;
        if last["status"] != "pending" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert_eq!(last["status"], "done", "{last}");
    let generated = project_of(&last["result"]);
    assert!(!generated.characters.is_empty());
    assert_eq!(svc.stored(&p.id), generated);
}

#[test]
fn every_engine_error_maps_to_one_documented_status() {
    let schema = SchemaError {
        code: "MALFORMED_BLOCK".into(),
        message: "m".into(),
        raw_text: String::new(),
        attempts: 3,
        diagnostics: vec![],
    };
    let cases: Vec<(Error, u16, &str)> = vec![
        (Error::Validation(ValidationReport::default()), 422, "VALIDATION"),
        (Error::StageOrder { stage: Stage::Plots, missing: Stage::Characters }, 409, "STAGE_ORDER"),
        (Error::Conflict { expected: 1, actual: 2 }, 409, "CONFLICT"),
        (Error::NotFound("x".into()), 404, "NOT_FOUND"),
        (Error::InvalidRequest("x".into()), 400, "INVALID_REQUEST"),
        (ProviderError::Timeout("x".into()).into(), 504, "PROVIDER_TIMEOUT"),
        (ProviderError::Auth("x".into()).into(), 502, "PROVIDER_AUTH"),
        (ProviderError::RateLimit("x".into()).into(), 429, "PROVIDER_RATE_LIMIT"),
        (ProviderError::Transport("x".into()).into(), 502, "PROVIDER_TRANSPORT"),
        (schema.into(), 502, "SCHEMA"),
        (StorageError::Io { path: "p".into(), message: "m".into() }.into(), 500, "STORAGE"),
    ];
    for (error, status, code) in cases {
        assert_eq!(status_for(&error).as_u16(), status, "{code}");
        assert_eq!(error.code(), code);
    }
}
