use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use corefqa::curation::{CharSpan, DraftPair};
use corefqa::dataset::read_squad_json;
use corefqa::text::find_char;
use corefqa::Answer;
use corefqa_service::{router, AppState, Corpus, PairStore, ScorerConfig, ServeError, Server, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const PASSAGES: &str = include_str!("fixtures/passages.json");

fn state(store: &Path) -> AppState {
    AppState::new(
        Corpus::parse(PASSAGES).unwrap(),
        PairStore::open(store).unwrap(),
        &ScorerConfig::Tfidf,
        Default::default(),
    )
}

fn app(store: &Path) -> Router {
    router(Arc::new(state(store)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn text_of(id: &str) -> String {
    Corpus::parse(PASSAGES).unwrap().get(id).unwrap().text.clone()
}

/// Char span of the `nth` occurrence of `needle`.
fn span(text: &str, needle: &str, nth: usize) -> CharSpan {
    let mut from = 0;
    let mut found = 0;
    loop {
        let rest: String = text.chars().skip(from).collect();
        let at = from + find_char(&rest, needle).expect("needle present");
        if found == nth {
            return CharSpan::new(at, at + needle.chars().count());
        }
        found += 1;
        from = at + 1;
    }
}

fn draft(passage: &str, question: &str, m1: (&str, usize), m2: (&str, usize)) -> DraftPair {
    let text = text_of(passage);
    let m1 = span(&text, m1.0, m1.1);
    let m2s = span(&text, m2.0, m2.1);
    DraftPair {
        passage_id: passage.into(),
        question: question.into(),
        answer: Answer::new(m2.0, m2s.start),
        m1,
        m2: m2s,
    }
}

fn motteux() -> DraftPair {
    draft(
        "estate",
        "Whose nephew inherited the estate?",
        ("his", 0),
        ("John Motteux", 0),
    )
}

fn to_json(d: &DraftPair) -> Value {
    serde_json::to_value(d).unwrap()
}

fn rule_passed(report: &Value, rule: &str) -> bool {
    report["rules"][rule]["passed"].as_bool().unwrap()
}

#[tokio::test]
async fn empty_store_lists_no_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    assert_eq!(call(&app, "GET", "/pairs", None).await, (StatusCode::OK, json!([])));
}

#[tokio::test]
async fn passages_are_ranked_by_entities_then_pronouns() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    let (status, body) = call(&app, "GET", "/passages?sort=score", None).await;
    assert_eq!(status, StatusCode::OK);
    let rows: Vec<(String, u64, u64)> = body
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["passage_id"].as_str().unwrap().to_string(),
                r["distinct_entity_count"].as_u64().unwrap(),
                r["pronoun_count"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        rows,
        [
            ("talks".to_string(), 4, 1),
            ("estate".to_string(), 1, 3),
            ("dog".to_string(), 0, 1)
        ]
    );
    assert_eq!(body[0]["rank_key"], json!([4, 1]));

    let (_, by_id) = call(&app, "GET", "/passages?sort=id", None).await;
    let ids: Vec<&str> = by_id
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["passage_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["dog", "estate", "talks"]);
    assert_eq!(
        call(&app, "GET", "/passages?sort=length", None).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn passage_view_has_highlights() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    let (status, body) = call(&app, "GET", "/passages/estate", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], text_of("estate"));
    assert_eq!(body["sentences"].as_array().unwrap().len(), 3);
    let hl = body["highlights"].as_array().unwrap();
    let john = hl.iter().find(|h| h["text"] == "John Motteux").unwrap();
    assert_eq!((&john["kind"], &john["class"]), (&json!("entity"), &json!("proper")));
    assert_eq!(john["start"], 25);
    let his: Vec<&Value> = hl.iter().filter(|h| h["text"] == "his").collect();
    assert_eq!(his.len(), 2);
    assert!(his.iter().all(|h| h["kind"] == "pronoun" && h["class"] == "pronoun"));
    let (status, body) = call(&app, "GET", "/passages/nope", None).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::NOT_FOUND, Some("not_found"))
    );
}

#[tokio::test]
async fn validate_reports_each_guideline_rule() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));

    let (status, body) = call(&app, "POST", "/validate", Some(to_json(&motteux()))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["passed"], true);
    for rule in [
        "different_sentence",
        "informativeness",
        "answer_in_passage",
        "answer_equals_m2",
        "non_duplicate",
    ] {
        assert!(rule_passed(&body["report"], rule), "{rule}");
    }
    // Closest to "Later his nephew inherited it."; the answer is elsewhere.
    assert_eq!(body["bias_preview"]["sentence_index"], 1);
    assert_eq!(body["bias_preview"]["answer_in_sentence"], false);
    assert!(body["bias_preview"].get("warning").is_none());

    let same = draft("talks", "Who did Bush meet?", ("his", 0), ("Bush", 1));
    let (_, body) = call(&app, "POST", "/validate", Some(to_json(&same))).await;
    assert_eq!(body["report"]["passed"], false);
    assert!(!rule_passed(&body["report"], "different_sentence"));
    assert!(rule_passed(&body["report"], "informativeness"));

    let backwards = draft(
        "estate",
        "Whose nephew inherited the estate?",
        ("John Motteux", 0),
        ("his", 0),
    );
    let (_, body) = call(&app, "POST", "/validate", Some(to_json(&backwards))).await;
    assert!(rule_passed(&body["report"], "different_sentence"));
    assert!(!rule_passed(&body["report"], "informativeness"));

    let mut echo = motteux();
    echo.question = "Who bought the estate in 1800?".into();
    let (_, body) = call(&app, "POST", "/validate", Some(to_json(&echo))).await;
    assert_eq!(body["report"]["passed"], true);
    assert_eq!(body["bias_preview"]["sentence_index"], 0);
    assert_eq!(body["bias_preview"]["answer_in_sentence"], true);
    assert!(body["bias_preview"]["warning"].is_string());

    let mut empty = motteux();
    empty.question = "  ".into();
    let (status, body) = call(&app, "POST", "/validate", Some(to_json(&empty))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["bias_preview"].is_null());
    assert!(body["preview_error"].as_str().unwrap().contains("empty"));

    let mut far = motteux();
    far.m1 = CharSpan::new(500, 503);
    assert_eq!(
        call(&app, "POST", "/validate", Some(to_json(&far))).await.0,
        StatusCode::BAD_REQUEST
    );
    let mut lost = motteux();
    lost.passage_id = "missing".into();
    assert_eq!(
        call(&app, "POST", "/validate", Some(to_json(&lost))).await.0,
        StatusCode::NOT_FOUND
    );
    assert!(call(&app, "POST", "/validate", Some(json!({"question": "?"})))
        .await
        .0
        .is_client_error());
}

#[tokio::test]
async fn pairs_are_stored_and_duplicates_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    let (status, record) = call(&app, "POST", "/pairs", Some(to_json(&motteux()))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(record["status"], "accepted");
    assert_eq!(record["validation"]["passed"], true);
    assert_eq!(record["answer"]["text"], "John Motteux");
    let (_, list) = call(&app, "GET", "/pairs", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["id"], record["id"]);

    let (status, body) = call(&app, "POST", "/pairs", Some(to_json(&motteux()))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!rule_passed(&body["report"], "non_duplicate"));

    let same = draft("talks", "Who did Bush meet?", ("his", 0), ("Bush", 1));
    let (status, body) = call(&app, "POST", "/pairs", Some(to_json(&same))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "validation_failed");
    assert!(!rule_passed(&body["report"], "different_sentence"));

    // A failing draft may still be kept as a draft.
    let mut req = to_json(&same);
    req["status"] = json!("draft");
    let (status, kept) = call(&app, "POST", "/pairs", Some(req)).await;
    assert_eq!((status, &kept["status"]), (StatusCode::CREATED, &json!("draft")));
    assert_eq!(
        call(&app, "GET", "/pairs?status=accepted", None)
            .await
            .1
            .as_array()
            .unwrap()
            .len(),
        1
    );
    assert_eq!(call(&app, "GET", "/pairs", None).await.1.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn status_updates_replace_by_id_and_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    let app1 = app(&path);
    let (_, record) = call(&app1, "POST", "/pairs", Some(to_json(&motteux()))).await;
    let mut reject = to_json(&motteux());
    reject["id"] = record["id"].clone();
    reject["status"] = json!("rejected");
    let (status, updated) = call(&app1, "POST", "/pairs", Some(reject)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(
        (&updated["id"], &updated["created_at"]),
        (&record["id"], &record["created_at"])
    );
    let mut ghost = to_json(&motteux());
    ghost["id"] = json!("pair-99999");
    assert_eq!(
        call(&app1, "POST", "/pairs", Some(ghost)).await.0,
        StatusCode::NOT_FOUND
    );
    let (_, before) = call(&app1, "GET", "/pairs", None).await;
    drop(app1);

    // Replaying the log gives back the same state.
    let app2 = app(&path);
    let (_, after) = call(&app2, "GET", "/pairs", None).await;
    assert_eq!(after, before);
    assert_eq!(after.as_array().unwrap().len(), 1);
    assert_eq!(after[0]["status"], "rejected");
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);

    // The rejected pair no longer blocks an identical new one.
    assert_eq!(
        call(&app2, "POST", "/pairs", Some(to_json(&motteux()))).await.0,
        StatusCode::CREATED
    );
}

#[tokio::test]
async fn export_contains_accepted_pairs_only() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    let (status, body) = call(&app, "GET", "/export", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(read_squad_json(&body.to_string(), "x").unwrap().len(), 0);

    let accepted = [
        motteux(),
        draft(
            "estate",
            "Who had no children of his own?",
            ("his", 1),
            ("John Motteux", 0),
        ),
        draft("talks", "Who went into the talks?", ("Bush", 1), ("George W. Bush", 0)),
    ];
    for d in &accepted {
        let (status, body) = call(&app, "POST", "/pairs", Some(to_json(d))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
    }
    let mut req = to_json(&draft("dog", "What was happy?", ("It", 0), ("The dog", 0)));
    req["status"] = json!("draft");
    assert_eq!(call(&app, "POST", "/pairs", Some(req)).await.0, StatusCode::CREATED);

    let (_, body) = call(&app, "GET", "/export?format=squad", None).await;
    let text = body.to_string();
    let ds = read_squad_json(&text, "x").unwrap();
    assert_eq!(ds.len(), 3);
    ds.validate().unwrap();
    let answers: Vec<&str> = ds.iter().map(|e| e.answers[0].text.as_str()).collect();
    assert_eq!(answers, ["John Motteux", "John Motteux", "George W. Bush"]);
    assert!(ds.iter().all(|e| e.context == text_of(e.doc_id().unwrap())));
    let (_, again) = call(&app, "GET", "/export", None).await;
    assert_eq!(read_squad_json(&again.to_string(), "x").unwrap(), ds);
    assert_eq!(
        call(&app, "GET", "/export?format=csv", None).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn export_flags_records_that_drifted_from_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    call(&app(&path), "POST", "/pairs", Some(to_json(&motteux()))).await;
    let edited = PASSAGES.replace("bought by John Motteux", "bought by Sir John Motteux");
    let app = router(Arc::new(AppState::new(
        Corpus::parse(&edited).unwrap(),
        PairStore::open(&path).unwrap(),
        &ScorerConfig::Tfidf,
        Default::default(),
    )));
    let (status, body) = call(&app, "GET", "/export", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["message"].as_str().unwrap().contains("not at offset"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_write_whole_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    let app = app(&path);
    let tasks: Vec<_> = (0..24)
        .map(|i| {
            let app = app.clone();
            let mut d = motteux();
            d.question = format!("Whose nephew inherited the estate, take {i}?");
            tokio::spawn(async move { call(&app, "POST", "/pairs", Some(to_json(&d))).await.0 })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    // Racing identical posts: exactly one wins.
    let dupes: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "POST", "/pairs", Some(to_json(&motteux()))).await.0 })
        })
        .collect();
    let mut created = 0;
    for t in dupes {
        if t.await.unwrap() == StatusCode::CREATED {
            created += 1;
        }
    }
    assert_eq!(created, 1);
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 25);
    let mut ids: Vec<String> = lines
        .iter()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 25);
}

/// Walk through one annotation session the way the workbench drives it.
#[tokio::test]
async fn annotation_session_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("pairs.jsonl"));
    let (_, ranked) = call(&app, "GET", "/passages?sort=score", None).await;
    let top = ranked[0]["passage_id"].as_str().unwrap().to_string();
    assert_eq!(top, "talks");
    let (_, view) = call(&app, "GET", &format!("/passages/{top}"), None).await;
    assert!(view["highlights"]
        .as_array()
        .unwrap()
        .iter()
        .any(|h| h["text"] == "his"));

    let bad = draft("talks", "Whose defeated rival did Bush meet?", ("his", 0), ("Bush", 1));
    let (_, v) = call(&app, "POST", "/validate", Some(to_json(&bad))).await;
    assert!(!rule_passed(&v["report"], "different_sentence"));
    let fixed = draft(
        "talks",
        "Whose defeated rival did Bush meet?",
        ("his", 0),
        ("George W. Bush", 0),
    );
    let (_, v) = call(&app, "POST", "/validate", Some(to_json(&fixed))).await;
    assert_eq!(v["report"]["passed"], true);
    let (status, record) = call(&app, "POST", "/pairs", Some(to_json(&fixed))).await;
    assert_eq!(status, StatusCode::CREATED);

    let (_, pairs) = call(&app, "GET", "/pairs", None).await;
    assert_eq!(pairs.as_array().unwrap().len(), 1);
    let (_, export) = call(&app, "GET", "/export", None).await;
    let ds = read_squad_json(&export.to_string(), "x").unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds.examples[0].qid, record["id"].as_str().unwrap());
    assert_eq!(ds.examples[0].answers[0].text, "George W. Bush");
}

#[tokio::test]
async fn binding_a_taken_port_fails() {
    let dir = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    match Server::bind_state(&addr, state(&dir.path().join("p.jsonl"))).await {
        Err(ServeError::BindError { addr: a, .. }) => assert_eq!(a, addr),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("bound a taken port"),
    }
}

#[tokio::test]
async fn server_answers_over_tcp_and_shuts_down() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("passages.json");
    std::fs::write(&corpus, PASSAGES).unwrap();
    let mut config = ServiceConfig::new(&corpus, dir.path().join("pairs.jsonl"));
    config.listen = "127.0.0.1:0".into();
    let server = Server::bind(&config).await.unwrap();
    let addr = server.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(server.run(async {
        let _ = stopped.await;
    }));

    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /pairs HTTP/1.1\r\nhost: local\r\nconnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).await.unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.ends_with("[]"), "{reply}");

    stop.send(()).unwrap();
    handle.await.unwrap().unwrap();
    assert!(config.store.exists());
}

#[tokio::test]
async fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig::new(dir.path().join("missing.json"), dir.path().join("p.jsonl"));
    assert!(matches!(Server::bind(&config).await, Err(ServeError::Read { .. })));
    let corpus = dir.path().join("dup.json");
    std::fs::write(&corpus, r#"[{"id":"a","text":"x"},{"id":"a","text":"y"}]"#).unwrap();
    let config = ServiceConfig::new(&corpus, dir.path().join("p.jsonl"));
    assert!(matches!(Server::bind(&config).await, Err(ServeError::Corpus(_))));
    let jsonl = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n";
    assert_eq!(Corpus::parse(jsonl).unwrap().len(), 2);
}
