use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use imteval_core::backends::BackendSpec;
use imteval_core::corpus::read_logs;
use imteval_core::session::SessionLog;
use imteval_core::text::Lang;
use imteval_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};

fn start(config: ServiceConfig) -> (String, AppState) {
    let state = AppState::new(config).unwrap();
    let app = router(state.clone());
    let std_listener = TcpListener::bind("127.0.0.1:0").unwrap();
    std_listener.set_nonblocking(true).unwrap();
    let addr = std_listener.local_addr().unwrap();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{addr}"), state)
}

fn config(spec: &str) -> ServiceConfig {
    ServiceConfig::new(spec.parse::<BackendSpec>().unwrap(), Lang::new("de"), Lang::new("en"))
}

/// Returns status and JSON body, whatever the status.
fn post(url: &str, body: Value) -> (u16, Value) {
    let r = match ureq::post(url).set("Content-Type", "application/json").send_string(&body.to_string()) {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("{e}"),
    };
    let status = r.status();
    (status, serde_json::from_str(&r.into_string().unwrap()).unwrap())
}

fn get(url: &str) -> (u16, String) {
    let r = match ureq::get(url).call() {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("{e}"),
    };
    (r.status(), r.into_string().unwrap())
}

fn create(base: &str, body: Value) -> (String, String) {
    let (s, v) = post(&format!("{base}/api/sessions"), body);
    assert_eq!(s, 200, "{v}");
    (v["id"].as_str().unwrap().to_string(), v["hypothesis"].as_str().unwrap().to_string())
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[test]
fn oracle_session_succeeds_without_edits() {
    let (base, state) = start(config("oracle"));
    let (id, hyp) = create(&base, json!({"source": "Die Katze", "reference": "The cat"}));
    assert_eq!(hyp, "The cat");
    let (s, m) = post(&format!("{base}/api/sessions/{id}/submit"), json!({"final_text": "The cat", "mtpe_clicked": false}));
    assert_eq!(s, 200);
    assert_eq!(m["ec"], 0);
    assert_eq!(m["success"], true);
    assert_eq!(m["at"], 1);
    let logs = state.finished_logs();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].config.policy, "human");
    assert_eq!(logs[0].outcome.kind, imteval_core::session::OutcomeKind::Success);
}

#[test]
fn turns_are_costed_from_tags() {
    let (base, _) = start(config("prefix"));
    let (id, hyp) = create(
        &base,
        json!({"source": "Die Katze sass", "reference": "the cat sat", "initial": "Xhe cat sat"}),
    );
    assert_eq!(hyp, "Xhe cat sat");
    let (s, t) = post(
        &format!("{base}/api/sessions/{id}/turns"),
        json!({"text": "the cat sat", "tags": "rrrbbbbbbbb"}),
    );
    assert_eq!(s, 200, "{t}");
    assert_eq!(t["cost"], 5);
    assert_eq!(t["turn"], 1);
    assert_eq!(t["hypothesis"], "the cat sat");
    assert_eq!(t["violation"], false);
    assert_eq!(t["template"], json!({"segments": [{"c": "the"}, {"b": true}], "hints": []}));
    assert!(t["witness"]["spans"].is_array());
    let (_, m) = post(&format!("{base}/api/sessions/{id}/submit"), json!({"final_text": "the cat sat"}));
    assert_eq!((m["ec"].as_u64(), m["success"].as_bool(), m["at"].as_u64()), (Some(5), Some(true), Some(2)));
}

#[test]
fn placeholder_tags_build_prefix_templates() {
    let (base, _) = start(config("prefix"));
    let (id, _) = create(&base, json!({"source": "x", "reference": "a b c", "initial": "a b"}));
    let (s, t) = post(&format!("{base}/api/sessions/{id}/turns"), json!({"text": "a b*", "tags": "kkkb"}));
    assert_eq!(s, 200, "{t}");
    assert_eq!(t["template"]["segments"], json!([{"c": "a b"}, {"b": true}]));
    assert_eq!(t["cost"], 1);
    assert_eq!(t["hypothesis"], "a b c");
}

#[test]
fn malformed_requests_are_rejected() {
    let (base, _) = start(config("prefix"));
    let (id, _) = create(&base, json!({"source": "x", "reference": "a b", "initial": "a c"}));
    let turns = format!("{base}/api/sessions/{id}/turns");
    let (s, v) = post(&turns, json!({"text": "a c", "tags": "kkx"}));
    assert_eq!((s, error_code(&v)), (400, "malformed_tags"));
    let (s, v) = post(&turns, json!({"text": "a c", "tags": "kk"}));
    assert_eq!((s, error_code(&v)), (400, "malformed_tags"));
    let (s, v) = post(&turns, json!({"text": "a b", "tags": "kkk"}));
    assert_eq!((s, error_code(&v)), (400, "tags_mismatch"));
    let (s, v) = post(&turns, json!({"text": "a"}));
    assert_eq!((s, error_code(&v)), (400, "invalid_body"));
    assert!(v["error"]["message"].is_string());

    let (s, v) = post(&format!("{base}/api/sessions"), json!({"source": "x", "backend": "warp:9"}));
    assert_eq!((s, error_code(&v)), (400, "invalid_backend"));
    let (s, v) = post(&format!("{base}/api/sessions"), json!({"source": "x", "backend": "oracle"}));
    assert_eq!((s, error_code(&v)), (400, "missing_reference"));
    let (s, v) = post(&format!("{base}/api/sessions"), json!({"reference": "x"}));
    assert_eq!((s, error_code(&v)), (400, "missing_source"));
    let (s, v) = post(&format!("{base}/api/sessions"), json!({"index": 0, "reference": "x"}));
    assert_eq!((s, error_code(&v)), (400, "invalid_index"));
}

#[test]
fn unknown_sessions_are_not_found() {
    let (base, _) = start(config("oracle"));
    let (s, v) = post(&format!("{base}/api/sessions/nope/turns"), json!({"text": "a", "tags": "k"}));
    assert_eq!((s, error_code(&v)), (404, "not_found"));
    let (s, v) = post(&format!("{base}/api/sessions/nope/submit"), json!({"final_text": "a"}));
    assert_eq!((s, error_code(&v)), (404, "not_found"));
    assert_eq!(get(&format!("{base}/api/sessions/nope/log")).0, 404);
}

#[test]
fn submit_is_final() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("human.jsonl");
    let mut cfg = config("oracle");
    cfg.log_path = Some(path.clone());
    let (base, state) = start(cfg);
    let (id, _) = create(&base, json!({"source": "x", "reference": "a b"}));
    assert_eq!(get(&format!("{base}/api/sessions/{id}/log")).0, 409);
    let submit = format!("{base}/api/sessions/{id}/submit");
    let (s, first) = post(&submit, json!({"final_text": "a b"}));
    assert_eq!(s, 200);
    let (s, v) = post(&submit, json!({"final_text": "zzz", "mtpe_clicked": true}));
    assert_eq!((s, error_code(&v)), (409, "session_closed"));
    let (s, v) = post(&format!("{base}/api/sessions/{id}/turns"), json!({"text": "a b", "tags": "kkk"}));
    assert_eq!((s, error_code(&v)), (409, "session_closed"));
    assert_eq!(state.finished_logs().len(), 1);
    assert_eq!(first["success"], true);

    let (s, body) = get(&format!("{base}/api/sessions/{id}/log"));
    assert_eq!(s, 200);
    let log: SessionLog = serde_json::from_str(body.trim()).unwrap();
    assert_eq!(log, state.finished_logs()[0]);
    let (_, export) = get(&format!("{base}/api/export"));
    assert_eq!(export, body);
    assert_eq!(read_logs(&path).unwrap(), vec![log]);
}

#[test]
fn mtpe_checkbox_and_manual_edits_fail_the_session() {
    let (base, state) = start(config("prefix"));
    let (id, _) = create(&base, json!({"source": "x", "reference": "the cat sat", "initial": "the dog sat"}));
    let (_, m) = post(&format!("{base}/api/sessions/{id}/submit"), json!({"final_text": "the cat sat", "mtpe_clicked": true}));
    assert_eq!(m["success"], false);
    assert_eq!(m["ec"], 4);
    let (id, _) = create(&base, json!({"source": "x", "reference": "the cat sat", "initial": "the dog sat"}));
    let (_, m) = post(&format!("{base}/api/sessions/{id}/submit"), json!({"final_text": "the cat sat"}));
    assert_eq!(m["success"], false);
    let reasons: Vec<_> = state.finished_logs().iter().map(|l| l.outcome.reason.clone().unwrap()).collect();
    assert_eq!(reasons, ["mtpe_checkbox", "manual_edit"]);
}

#[test]
fn violations_are_reported() {
    let (base, _) = start(config("noisy:we=0,vr=1"));
    let (id, _) = create(&base, json!({"source": "x", "reference": "the cat sat", "initial": "Xhe cat sat"}));
    let (s, t) = post(
        &format!("{base}/api/sessions/{id}/turns"),
        json!({"text": "the cat sat", "tags": "rrrbbbbbbbb"}),
    );
    assert_eq!(s, 200, "{t}");
    assert_eq!(t["violation"], true);
    assert!(t["witness"].is_null());
}

/// A backend server answering every request after `delay`.
fn slow_backend(delay: Duration) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap() == 0 || h.trim().is_empty() {
                        break;
                    }
                    if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                thread::sleep(delay);
                let body = json!({"translation": "the cat sat"}).to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            });
        }
    });
    format!("http://{addr}")
}

#[test]
fn one_request_in_flight_per_session() {
    let backend = slow_backend(Duration::from_millis(400));
    let (base, _) = start(config(&format!("wire:{backend}")));
    let (id, hyp) = create(&base, json!({"source": "x"}));
    assert_eq!(hyp, "the cat sat");
    let turns = format!("{base}/api/sessions/{id}/turns");
    let body = json!({"text": "the cat sat*", "tags": "kkkkkkkkkkkb"});
    let first = {
        let (turns, body) = (turns.clone(), body.clone());
        thread::spawn(move || post(&turns, body))
    };
    thread::sleep(Duration::from_millis(100));
    let (s, v) = post(&turns, body);
    assert_eq!((s, error_code(&v)), (409, "turn_in_flight"));
    let (s, v) = first.join().unwrap();
    assert_eq!(s, 200, "{v}");
    assert!(v["latency_ms"].as_f64().unwrap() >= 400.0);
}

#[test]
fn concurrent_sessions_stay_isolated() {
    let (base, state) = start(config("prefix"));
    let clients: Vec<_> = (0..6)
        .map(|k| {
            let base = base.clone();
            thread::spawn(move || {
                let reference = format!("w{k} cat sat");
                let (id, hyp) = create(&base, json!({"source": "x", "reference": reference, "initial": format!("X{k} cat sat")}));
                assert_eq!(hyp, format!("X{k} cat sat"));
                let text = format!("w{k} cat sat");
                let (s, t) = post(
                    &format!("{base}/api/sessions/{id}/turns"),
                    json!({"text": text, "tags": "rrbbbbbbbb"}),
                );
                assert_eq!(s, 200, "{t}");
                assert_eq!(t["hypothesis"], reference);
                let (_, m) = post(&format!("{base}/api/sessions/{id}/submit"), json!({"final_text": reference}));
                assert_eq!(m["success"], true);
                assert_eq!(m["ec"], 4);
                (id, reference)
            })
        })
        .collect();
    let done: Vec<_> = clients.into_iter().map(|c| c.join().unwrap()).collect();
    let logs = state.finished_logs();
    assert_eq!(logs.len(), 6);
    for (_, reference) in done {
        let log = logs.iter().find(|l| l.config.reference.as_deref() == Some(&reference)).unwrap();
        assert_eq!(log.turns.len(), 2);
        assert_eq!(log.final_hypothesis(), Some(reference.as_str()));
    }
}

#[test]
fn serves_the_page() {
    let (base, _) = start(config("oracle"));
    let (s, body) = get(&format!("{base}/"));
    assert_eq!(s, 200);
    assert!(body.contains("/api/sessions"));
}
