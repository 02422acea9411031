use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use ubsr_core::ir::Concept;
use ubsr_core::registry::Registry;
use ubsr_core::rulegen::completer::MapCompleter;
use ubsr_core::rulegen::{build_base_rule_prompt, BaseRuleRequest, Pruning};
use ubsr_core::rules::{load_rules, save_rules, RuleDatabase};
use ubsr_studio::{router, StudioConfig};

const SCALA_CODE: &str = "import scala.collection.mutable\nobject A { def f(x: Int) = x }";

const SCALA_RESPONSE: &str = r#"The package concept appears as `import_declaration` nodes.
```json
{
  "import_declaration": {
    "ubsr_node_type": "ubsr_package",
    "extractor": [{"op": "regex_capture", "pattern": "import\\s+([\\w.]*\\w)", "group": 1}],
    "test_snippet": "import scala.collection.mutable",
    "expected": "scala.collection.mutable"
  }
}
```
Output: scala.collection.mutable
"#;

/// Rules directory holding the bundled rules minus scala's package rule.
fn rules_without_scala_packages(dir: &Path) {
    let builtin = RuleDatabase::builtin();
    let mut db = RuleDatabase::new(builtin.version);
    for r in builtin.rules() {
        if !(r.language.as_str() == "scala" && r.concept() == Some(Concept::Package)) {
            db.insert(r.clone()).unwrap();
        }
    }
    save_rules(&db, dir).unwrap();
}

fn scala_request() -> BaseRuleRequest {
    BaseRuleRequest {
        test_language: "scala".into(),
        concept: Concept::Package,
        exemplar_languages: vec!["haskell".into(), "elm".into()],
        pruning: Pruning::Concept,
        test_code: SCALA_CODE.into(),
        cross_paradigm: false,
    }
}

fn app(dir: &Path) -> Router {
    let db = load_rules(dir).unwrap();
    let prompt = build_base_rule_prompt(&scala_request(), &Registry::builtin(), &db).unwrap();
    let stub = MapCompleter(HashMap::from([(prompt.rendered, SCALA_RESPONSE.to_string())]));
    router(StudioConfig::new(Registry::builtin(), dir, Arc::new(stub)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn python_import_rule(expected: &str) -> Value {
    json!({
        "language": "python",
        "ast_node_type": "import_statement",
        "ubsr_node_type": "ubsr_package",
        "extractor": [
            {"op": "split_once", "separator": "import ", "take_index": 1},
            {"op": "split_all", "separator": ","},
            {"op": "trim"},
            {"op": "segment_at", "separator": ".", "index": 0},
            {"op": "segment_at", "separator": " as ", "index": 0},
            {"op": "join", "separator": ", "}
        ],
        "test_snippet": "import math",
        "expected": expected
    })
}

#[tokio::test]
async fn languages_match_registry() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let (status, body) = call(&app(dir.path()), "GET", "/languages", None).await;
    assert_eq!(status, StatusCode::OK);
    let langs = body.as_array().unwrap();
    assert_eq!(langs.len(), 21);
    let scala = langs.iter().find(|l| l["language"] == "scala").unwrap();
    assert_eq!(scala["paradigm"], "functional_expression");
    let known: Vec<&str> = langs
        .iter()
        .filter(|l| l["known"] == true)
        .map(|l| l["language"].as_str().unwrap())
        .collect();
    assert_eq!(known.len(), 6);
    assert!(known.contains(&"haskell") && known.contains(&"python") && !known.contains(&"scala"));
}

#[tokio::test]
async fn parse_preview() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let app = app(dir.path());
    let (status, body) = call(
        &app,
        "POST",
        "/parse-preview",
        Some(json!({"code": "import math", "language": "python"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["rendered"].as_str().unwrap().contains("import_statement"));

    let (_, empty) = call(&app, "POST", "/parse-preview", Some(json!({"code": "", "language": "python"}))).await;
    assert_eq!(empty["rendered"], "(module)");

    let code = "import os\n\ndef f(x):\n    # c\n    return [y for y in x if y]\n";
    let (_, pruned) = call(
        &app,
        "POST",
        "/parse-preview",
        Some(json!({"code": code, "language": "python", "pruning": {"mode": "concept"}, "concept": "package"})),
    )
    .await;
    assert!(pruned["token_count"].as_u64() <= pruned["unpruned_token_count"].as_u64());
    assert!(pruned["token_count"].as_u64().unwrap() < pruned["unpruned_token_count"].as_u64().unwrap());

    let (status, body) = call(&app, "POST", "/parse-preview", Some(json!({"code": "x", "language": "cobol"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_language");
    assert!(body["message"].as_str().unwrap().contains("cobol"));
}

#[tokio::test]
async fn generate_validate_commit() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let app = app(dir.path());
    let req = serde_json::to_value(scala_request()).unwrap();

    let mut dry = req.clone();
    dry["dry"] = json!(true);
    let (status, body) = call(&app, "POST", "/rule/generate", Some(dry.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["response"].is_null() && body["candidate_rule"].is_null());
    let (_, again) = call(&app, "POST", "/rule/generate", Some(dry)).await;
    assert_eq!(body["prompt"]["rendered"], again["prompt"]["rendered"]);

    let (status, gen) = call(&app, "POST", "/rule/generate", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let candidate = gen["candidate_rule"].clone();
    assert_eq!(candidate["ast_node_type"], "import_declaration");
    assert_eq!(gen["claimed_output"], "scala.collection.mutable");

    // commit without validating first
    let (status, body) = call(&app, "POST", "/rule/commit", Some(json!({"candidate_rule": candidate, "version": 1}))).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "not_accepted");

    let (status, val) = call(
        &app,
        "POST",
        "/rule/validate",
        Some(json!({"candidate_rule": candidate, "test_cases": [
            {"snippet": "import scala.collection.mutable", "expected": "scala.collection.mutable"},
            {"snippet": "import java.util.{List, Map}", "expected": "java.util"}
        ]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(val["report"]["verdict"], "accept");
    let token = val["accept_token"].as_str().unwrap().to_string();

    let before = std::fs::read_to_string(dir.path().join("scala.json")).unwrap();
    let (status, body) = call(
        &app,
        "POST",
        "/rule/commit",
        Some(json!({"candidate_rule": candidate, "version": 0, "accept_token": token})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "stale_version");

    let (_, v) = call(&app, "GET", "/rules/version", None).await;
    let version = v["version"].as_u64().unwrap();
    let (status, body) = call(
        &app,
        "POST",
        "/rule/commit",
        Some(json!({"candidate_rule": candidate, "version": version, "accept_token": token})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], version + 1);
    let after = std::fs::read_to_string(dir.path().join("scala.json")).unwrap();
    assert!(!before.contains("import_declaration") && after.contains("import_declaration"));
    assert_eq!(load_rules(dir.path()).unwrap().len(), RuleDatabase::builtin().len());

    // tokens are single use
    let (status, _) = call(
        &app,
        "POST",
        "/rule/commit",
        Some(json!({"candidate_rule": candidate, "version": version + 1, "accept_token": token})),
    )
    .await;
    assert_eq!(status, StatusCode::FORBIDDEN);

    // a fresh accept for the same key now conflicts
    let (_, val) = call(&app, "POST", "/rule/validate", Some(json!({"candidate_rule": candidate}))).await;
    let (status, body) = call(
        &app,
        "POST",
        "/rule/commit",
        Some(json!({"candidate_rule": candidate, "version": version + 1, "accept_token": val["accept_token"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "duplicate_rule");
}

#[tokio::test]
async fn paradigm_mismatch_is_409() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let app = app(dir.path());
    let req = json!({
        "test_language": "cpp", "concept": "package", "exemplar_languages": ["python"],
        "pruning": {"mode": "depth", "depth": 2}, "test_code": "#include <vector>", "dry": true
    });
    let (status, body) = call(&app, "POST", "/rule/generate", Some(req.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "paradigm_mismatch");
    let mut over = req;
    over["cross_paradigm"] = json!(true);
    let (status, _) = call(&app, "POST", "/rule/generate", Some(over)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn validation_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let app = app(dir.path());
    let (status, body) = call(&app, "POST", "/rule/validate", Some(json!({"candidate_rule": python_import_rule("math")}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["verdict"], "accept");
    assert!(body["accept_token"].is_string());

    let (_, body) = call(&app, "POST", "/rule/validate", Some(json!({"candidate_rule": python_import_rule("Math")}))).await;
    assert_eq!(body["report"]["verdict"], "reject");
    assert!(body["accept_token"].is_null());

    let mut broken = python_import_rule("math");
    broken.as_object_mut().unwrap().remove("extractor");
    let (status, body) = call(&app, "POST", "/rule/validate", Some(json!({"candidate_rule": broken}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "malformed_rule");

    let mut exec = python_import_rule("math");
    exec["extractor"] = json!([{"op": "exec"}]);
    let (status, _) = call(&app, "POST", "/rule/validate", Some(json!({"candidate_rule": exec}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, "POST", "/rule/validate", Some(json!({"nope": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
}

#[tokio::test]
async fn bearer_token_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    rules_without_scala_packages(dir.path());
    let mut cfg = StudioConfig::new(Registry::builtin(), dir.path(), Arc::new(MapCompleter::default()));
    cfg.bearer_token = Some("s3cret".into());
    let app = router(cfg);
    let (status, _) = call(&app, "GET", "/languages", None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let req = Request::builder()
        .uri("/languages")
        .header("authorization", "Bearer s3cret")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
