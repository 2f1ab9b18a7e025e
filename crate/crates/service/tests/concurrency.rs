mod common;

use axum::http::StatusCode;
use common::{send, Harness};
use serde_json::{json, Value};
use tutorgraph_core::fixtures::{DEMO_FIXTURE_JSON, REFERENCE_PACK_JSON};

fn spawn_post(app: axum::Router, path: String, body: Vec<u8>) -> tokio::task::JoinHandle<(StatusCode, Vec<u8>)> {
    tokio::spawn(async move { send(app, "POST", &path, Some(&body), None).await })
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_submissions_yield_exactly_one_conflict() {
    let h = Harness::with(|c| c.transition_delay_ms = 100);
    h.call("POST", "/fragments", Some(DEMO_FIXTURE_JSON.as_bytes())).await;
    h.call("POST", "/rulepacks", Some(REFERENCE_PACK_JSON.as_bytes())).await;
    let body = serde_json::to_vec(&json!({"submission": {"kind": "lesson"}})).unwrap();
    for _ in 0..10 {
        let (_, created) = h
            .json(
                "POST",
                "/sessions",
                Some(json!({"fragment_id": "stats-avg-median", "learner_id": "x", "capabilities": ["text", "code"]})),
            )
            .await;
        let id = created["session"]["id"].as_str().unwrap().to_string();
        let path = format!("/sessions/{id}/submissions");
        let racers: Vec<_> = (0..2)
            .map(|_| spawn_post(h.app.clone(), path.clone(), body.clone()))
            .collect();
        let mut statuses = Vec::new();
        for r in racers {
            let (status, bytes) = r.await.unwrap();
            if status == StatusCode::CONFLICT {
                let v: Value = serde_json::from_slice(&bytes).unwrap();
                assert_eq!(v["code"], "CONCURRENT_SUBMISSION");
            }
            statuses.push(status);
        }
        statuses.sort();
        assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
        let (_, session) = h.json("GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(session["steps"], 1);
        assert_eq!(session["current"], "Q1");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn different_sessions_do_not_block_each_other() {
    let h = Harness::with(|c| c.transition_delay_ms = 100);
    h.call("POST", "/fragments", Some(DEMO_FIXTURE_JSON.as_bytes())).await;
    let mut paths = Vec::new();
    for _ in 0..4 {
        let (_, created) = h
            .json(
                "POST",
                "/sessions",
                Some(json!({"fragment_id": "stats-avg-median", "learner_id": "x", "capabilities": ["text", "code"]})),
            )
            .await;
        paths.push(format!("/sessions/{}/submissions", created["session"]["id"].as_str().unwrap()));
    }
    let body = serde_json::to_vec(&json!({"submission": {"kind": "lesson"}})).unwrap();
    let tasks: Vec<_> = paths
        .iter()
        .map(|p| spawn_post(h.app.clone(), p.clone(), body.clone()))
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
}
